#pragma once

// Small hand-built systems shared by the unit tests and the acceptance binary.

#include <cstdlib>
#include <random>
#include <string>

#include "sded/formulation/build.hpp"
#include "sded/grid.hpp"
#include "sded/scenarios.hpp"

namespace sded::fixtures
{

/// Environment variable if set, otherwise the value baked in at configure time.
inline std::string test_setting( const char* env, const char* fallback )
{
   const char* v = std::getenv( env );
   return v != nullptr ? std::string( v ) : std::string( fallback );
}

#ifdef SDED_CLI_DEFAULT
inline std::string cli_path() { return test_setting( "SDED_CLI", SDED_CLI_DEFAULT ); }
inline std::string external_backend() { return test_setting( "SDED_EXTERNAL_BACKEND", SDED_BACKEND_DEFAULT ); }
#endif

inline Generator make_gen( std::string id, BusId bus, double pmin, double pmax, double a, double b, double c,
                           double ramp )
{
   Generator g;
   g.id = std::move( id );
   g.bus = bus;
   g.p_min_mw = pmin;
   g.p_max_mw = pmax;
   g.cost_a = a;
   g.cost_b = b;
   g.cost_c = c;
   g.ramp_mw_per_min = ramp;
   return g;
}

inline StorageUnit make_battery( std::string id, BusId bus, double rating_mw )
{
   StorageUnit u;
   u.id = std::move( id );
   u.bus = bus;
   u.rating_mw = rating_mw;
   u.energy_cap_mwh = 4.0 * rating_mw;
   return u;
}

/// 3 buses, 2 generators, 1 wind plant, 1 battery.
inline GridCase three_bus_case()
{
   GridCase c;
   c.name = "three_bus";
   c.base_mva = 100.0;
   c.buses = { { 1, 0.0, true }, { 2, 150.0, false }, { 3, 100.0, false } };
   c.lines = { { 1, 2, 10.0, 200.0 }, { 2, 3, 10.0, 200.0 }, { 1, 3, 10.0, 60.0 } };
   c.generators = { make_gen( "G1", 1, 20.0, 250.0, 0.002, 20.0, 100.0, 2.0 ),
                    make_gen( "G2", 2, 10.0, 150.0, 0.004, 32.0, 50.0, 3.0 ) };
   c.wind_plants = { { "W1", 3, 100.0, std::nullopt } };
   c.storage_units = { make_battery( "B1", 3, 20.0 ) };
   return c;
}

/// Two periods, two equally likely scenarios.
inline ScenarioSet three_bus_scenarios()
{
   ScenarioSet s;
   s.probs = { 0.5, 0.5 };
   s.forecast_load.resize( 2, 3 );
   s.forecast_load << 0.0, 150.0, 100.0, //
       0.0, 120.0, 80.0;
   s.forecast_wind.resize( 2, 1 );
   s.forecast_wind << 60.0, 90.0;
   Eigen::MatrixXd l0 = s.forecast_load * 1.05, l1 = s.forecast_load * 0.95;
   Eigen::MatrixXd w0( 2, 1 ), w1( 2, 1 );
   w0 << 80.0, 100.0;
   w1 << 40.0, 70.0;
   s.load = { l0, l1 };
   s.wind = { w0, w1 };
   return s;
}

/// Scenario set whose single scenario equals the forecast.
inline ScenarioSet deterministic_scenarios( const Eigen::MatrixXd& load, const Eigen::MatrixXd& wind, int k = 1 )
{
   ScenarioSet s;
   s.forecast_load = load;
   s.forecast_wind = wind;
   for( int i = 0; i < k; ++i )
   {
      s.probs.push_back( 1.0 / k );
      s.load.push_back( load );
      s.wind.push_back( wind );
   }
   return s;
}

/// Random dispatch problem with one battery, two periods and at most two scenarios (<= 12 binaries).
inline std::pair<GridCase, ScenarioSet> random_small_fixture( std::uint32_t seed )
{
   std::mt19937 rng( seed );
   auto U = [&]( double a, double b ) { return std::uniform_real_distribution<double>( a, b )( rng ); };
   auto I = [&]( int a, int b ) { return std::uniform_int_distribution<int>( a, b )( rng ); };

   GridCase c;
   c.name = fmt::format( "random{}", seed );
   const int N = I( 2, 3 );
   for( int i = 1; i <= N; ++i )
      c.buses.push_back( { i, U( 20.0, 120.0 ), i == 1 } );
   for( int i = 2; i <= N; ++i )
      c.lines.push_back( { I( 1, i - 1 ), i, U( 5.0, 20.0 ), U( 40.0, 150.0 ) } );
   if( N == 3 && I( 0, 1 ) )
      c.lines.push_back( { 1, 3, U( 5.0, 20.0 ), U( 40.0, 150.0 ) } );
   for( int g = 0; g < 2; ++g )
   {
      auto gen = make_gen( fmt::format( "G{}", g + 1 ), I( 1, N ), U( 0.0, 15.0 ), U( 120.0, 250.0 ), U( 0.0, 0.01 ),
                           U( 10.0, 40.0 ), U( 0.0, 200.0 ), U( 1.0, 6.0 ) );
      gen.provides_regulation = g == 0 || I( 0, 1 ) == 1;
      c.generators.push_back( gen );
   }
   c.wind_plants = { { "W1", I( 1, N ), U( 50.0, 150.0 ), std::nullopt } };
   auto bat = make_battery( "B1", I( 1, N ), U( 10.0, 40.0 ) );
   bat.eta_ch = U( 0.8, 1.0 );
   bat.eta_dis = U( 0.8, 1.0 );
   c.storage_units = { bat };

   const int T = 2;
   const int K = I( 1, 2 );
   ScenarioSet s;
   s.forecast_load.resize( T, N );
   s.forecast_wind.resize( T, 1 );
   for( int t = 0; t < T; ++t )
   {
      for( int i = 0; i < N; ++i )
         s.forecast_load( t, i ) = c.buses[static_cast<std::size_t>( i )].demand_mw * U( 0.7, 1.3 );
      s.forecast_wind( t, 0 ) = c.wind_plants[0].capacity_mw * U( 0.2, 1.0 );
   }
   for( int k = 0; k < K; ++k )
   {
      s.probs.push_back( 1.0 / K );
      Eigen::MatrixXd l = s.forecast_load, w = s.forecast_wind;
      for( int t = 0; t < T; ++t )
      {
         for( int i = 0; i < N; ++i )
            l( t, i ) *= U( 0.85, 1.15 );
         w( t, 0 ) = std::min( c.wind_plants[0].capacity_mw, w( t, 0 ) * U( 0.5, 1.5 ) );
      }
      s.load.push_back( l );
      s.wind.push_back( w );
   }
   return { c, s };
}

/// Single-period demand drop of 800 MW that the generators cannot follow.
///
/// Four 600 MW units ramping 5 MW/min can shed only 300 MW per 15-minute step,
/// so the surplus lands on the wind plant.
inline std::pair<GridCase, ScenarioSet> demand_drop_fixture( double bess_rating_mw )
{
   GridCase c;
   c.name = "demand_drop";
   c.buses = { { 1, 1000.0, true }, { 2, 1000.0, false }, { 3, 0.0, false } };
   c.lines = { { 1, 2, 20.0, 2000.0 }, { 2, 3, 20.0, 2000.0 }, { 1, 3, 20.0, 2000.0 } };
   for( int g = 0; g < 4; ++g )
      c.generators.push_back(
          make_gen( fmt::format( "G{}", g + 1 ), g < 2 ? 1 : 2, 100.0, 600.0, 0.0005, 15.0 + g, 200.0, 5.0 ) );
   c.wind_plants = { { "W1", 3, 600.0, std::nullopt } };
   if( bess_rating_mw > 0.0 )
      c.storage_units = { make_battery( "B21", 3, bess_rating_mw ), make_battery( "B28", 3, bess_rating_mw ) };

   Eigen::MatrixXd load( 4, 3 ), wind( 4, 1 );
   load << 1000.0, 1000.0, 0.0, //
       1000.0, 1000.0, 0.0,     //
       600.0, 600.0, 0.0,       //
       600.0, 600.0, 0.0;
   wind << 500.0, 500.0, 500.0, 500.0;
   return { c, deterministic_scenarios( load, wind ) };
}

} // namespace sded::fixtures
