#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/grid.hpp"
#include "sded/rng.hpp"

namespace sded
{

inline constexpr int kNumPercentiles = 99;
inline constexpr int kMedianIndex = 49; // p50

enum class SeriesKind
{
   load,
   wind
};

enum class Coupling
{
   rank,
   independent_pair
};

inline const char* to_string( Coupling c ) { return c == Coupling::rank ? "rank" : "independent_pair"; }

inline Coupling parse_coupling( const std::string& s )
{
   if( s == "rank" )
      return Coupling::rank;
   if( s == "independent_pair" )
      return Coupling::independent_pair;
   throw std::invalid_argument( fmt::format( "unknown coupling '{}' (expected rank or independent_pair)", s ) );
}

using PercentileRow = std::array<double, kNumPercentiles>;

struct PercentileForecast
{
   SeriesKind kind = SeriesKind::load;
   std::vector<std::string> timestamps;  // as written in the file
   std::vector<std::int64_t> epoch_s;    // parsed, strictly increasing
   std::vector<PercentileRow> values;    // normalized multipliers
   double normalization = 1.0;           // divisor applied to the raw file values

   std::size_t horizon() const { return values.size(); }

   std::vector<double> median_path() const
   {
      std::vector<double> out;
      out.reserve( values.size() );
      for( const auto& row : values )
         out.push_back( row[kMedianIndex] );
      return out;
   }
};

struct DiscretePdf
{
   std::vector<double> support; // strictly increasing
   std::vector<double> probs;

   double mean() const
   {
      double m = 0.0;
      for( std::size_t i = 0; i < support.size(); ++i )
         m += support[i] * probs[i];
      return m;
   }
};

struct Stratum
{
   double value = 0.0;
   double prob = 0.0;
};

/// System-level multiplier paths, one per scenario.
struct SystemScenarioSet
{
   std::vector<double> probs;
   std::vector<std::vector<double>> load_path; // [K][T]
   std::vector<std::vector<double>> wind_path; // [K][T]
   std::vector<double> load_forecast;          // p50 path [T]
   std::vector<double> wind_forecast;          // p50 path [T]

   std::size_t size() const { return probs.size(); }
   std::size_t horizon() const { return load_forecast.size(); }
};

/// Bus-level scenarios in MW.
struct ScenarioSet
{
   std::vector<double> probs;
   std::vector<Eigen::MatrixXd> load;  // K x (T x buses)
   std::vector<Eigen::MatrixXd> wind;  // K x (T x plants)
   Eigen::MatrixXd forecast_load;      // T x buses
   Eigen::MatrixXd forecast_wind;      // T x plants
   std::uint64_t seed = 0;

   std::size_t size() const { return probs.size(); }
   std::size_t horizon() const { return static_cast<std::size_t>( forecast_load.rows() ); }
};

namespace detail
{

inline std::string trim( std::string_view s )
{
   auto b = s.find_first_not_of( " \t\r\n" );
   if( b == std::string_view::npos )
      return {};
   auto e = s.find_last_not_of( " \t\r\n" );
   return std::string( s.substr( b, e - b + 1 ) );
}

inline std::vector<std::string> split_csv( const std::string& line )
{
   std::vector<std::string> out;
   std::string cur;
   std::istringstream ss( line );
   while( std::getline( ss, cur, ',' ) )
      out.push_back( trim( cur ) );
   if( !line.empty() && line.back() == ',' )
      out.emplace_back();
   return out;
}

inline double parse_double( const std::string& s, const std::string& where )
{
   try
   {
      std::size_t used = 0;
      double v = std::stod( s, &used );
      if( used != s.size() )
         throw ParseError( "" );
      return v;
   }
   catch( const std::exception& )
   {
      throw ParseError( fmt::format( "{}: '{}' is not a number", where, s ) );
   }
}

/// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
constexpr std::int64_t days_from_civil( std::int64_t y, unsigned m, unsigned d )
{
   y -= m <= 2;
   const std::int64_t era = ( y >= 0 ? y : y - 399 ) / 400;
   const unsigned yoe = static_cast<unsigned>( y - era * 400 );
   const unsigned doy = ( 153 * ( m + ( m > 2 ? -3 : 9 ) ) + 2 ) / 5 + d - 1;
   const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
   return era * 146097 + static_cast<std::int64_t>( doe ) - 719468;
}

/// Accepts ISO-8601 "YYYY-MM-DD[T ]HH:MM[:SS][Z]" or a plain integer count.
inline std::int64_t parse_timestamp( const std::string& s, const std::string& where )
{
   if( !s.empty() && std::all_of( s.begin(), s.end(), []( char c ) { return std::isdigit( c ) || c == '-'; } ) &&
       s.find( '-', 1 ) == std::string::npos )
      return std::stoll( s );
   int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
   char sep = 0;
   int n = std::sscanf( s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec );
   if( n < 3 || ( n > 3 && n < 6 ) || ( n >= 4 && sep != 'T' && sep != ' ' ) || mo < 1 || mo > 12 || d < 1 ||
       d > 31 )
      throw ParseError( fmt::format( "{}: unrecognized timestamp '{}'", where, s ) );
   return days_from_civil( y, static_cast<unsigned>( mo ), static_cast<unsigned>( d ) ) * 86400 + h * 3600 +
          mi * 60 + sec;
}

inline std::uint64_t fnv1a( std::string_view s )
{
   std::uint64_t h = 1469598103934665603ull;
   for( unsigned char c : s )
   {
      h ^= c;
      h *= 1099511628211ull;
   }
   return h;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Forecast ingestion

/// Parses a percentile forecast from CSV text (`timestamp,p1,...,p99`).
inline PercentileForecast parse_percentile_forecasts( std::istream& in, SeriesKind kind,
                                                      const std::string& source = "<forecast>" )
{
   PercentileForecast fc;
   fc.kind = kind;
   std::string line;
   if( !std::getline( in, line ) )
      throw ParseError( fmt::format( "{}: empty file", source ) );
   auto header = detail::split_csv( line );
   if( header.size() != kNumPercentiles + 1 || header[0] != "timestamp" )
      throw ParseError( fmt::format( "{}: header must be timestamp,p1,...,p99 ({} columns found)", source,
                                     header.size() ) );
   for( int k = 1; k <= kNumPercentiles; ++k )
      if( header[static_cast<std::size_t>( k )] != fmt::format( "p{}", k ) )
         throw ParseError( fmt::format( "{}: header column {} should be p{}, found '{}'", source, k + 1, k,
                                        header[static_cast<std::size_t>( k )] ) );

   int lineno = 1;
   while( std::getline( in, line ) )
   {
      ++lineno;
      if( detail::trim( line ).empty() )
         continue;
      auto where = fmt::format( "{}:{}", source, lineno );
      auto cells = detail::split_csv( line );
      if( cells.size() != kNumPercentiles + 1 )
         throw ParseError( fmt::format( "{}: expected {} columns, found {}", where, kNumPercentiles + 1,
                                        cells.size() ) );
      auto ts = detail::parse_timestamp( cells[0], where );
      if( !fc.epoch_s.empty() && ts <= fc.epoch_s.back() )
         throw ParseError( fmt::format( "{}: timestamp '{}' is not strictly increasing", where, cells[0] ) );
      PercentileRow row{};
      for( int k = 0; k < kNumPercentiles; ++k )
      {
         double v = detail::parse_double( cells[static_cast<std::size_t>( k + 1 )], where );
         if( !( v >= 0.0 ) || !std::isfinite( v ) )
            throw ParseError( fmt::format( "{}: p{} = {} must be finite and >= 0", where, k + 1, v ) );
         row[static_cast<std::size_t>( k )] = v;
      }
      for( int k = 1; k < kNumPercentiles; ++k )
         if( row[static_cast<std::size_t>( k )] < row[static_cast<std::size_t>( k - 1 )] )
            throw NonMonotonePercentiles(
                fmt::format( "{}: percentiles decrease at timestep '{}' (p{} = {} > p{} = {})", where, cells[0],
                             k, row[static_cast<std::size_t>( k - 1 )], k + 1,
                             row[static_cast<std::size_t>( k )] ) );
      fc.timestamps.push_back( cells[0] );
      fc.epoch_s.push_back( ts );
      fc.values.push_back( row );
   }
   if( fc.values.empty() )
      throw ParseError( fmt::format( "{}: no data rows", source ) );

   double mean = 0.0;
   for( const auto& row : fc.values )
      mean += row[kMedianIndex];
   mean /= static_cast<double>( fc.values.size() );
   if( mean > 0.0 )
   {
      fc.normalization = mean;
      for( auto& row : fc.values )
         for( auto& v : row )
            v /= mean;
   }
   return fc;
}

/// Loads a forecast file; the p50 path is rescaled to mean 1 over the horizon.
inline PercentileForecast load_percentile_forecasts( const std::filesystem::path& path, SeriesKind kind )
{
   std::ifstream in( path );
   if( !in )
      throw IoError( fmt::format( "cannot open forecast file '{}'", path.string() ) );
   return parse_percentile_forecasts( in, kind, path.string() );
}

// ---------------------------------------------------------------------------
// Distribution construction

/// Each percentile point carries mass 1/99; equal values are merged.
inline DiscretePdf build_discrete_pdf( std::span<const double> percentiles )
{
   if( percentiles.empty() )
      throw ParseError( "build_discrete_pdf: empty percentile vector" );
   for( std::size_t k = 1; k < percentiles.size(); ++k )
      if( percentiles[k] < percentiles[k - 1] )
         throw NonMonotonePercentiles( fmt::format( "percentile {} decreases", k + 1 ) );
   const double n = static_cast<double>( percentiles.size() );
   DiscretePdf pdf;
   std::size_t k = 0;
   while( k < percentiles.size() )
   {
      std::size_t j = k;
      while( j < percentiles.size() && percentiles[j] == percentiles[k] )
         ++j;
      pdf.support.push_back( percentiles[k] );
      pdf.probs.push_back( static_cast<double>( j - k ) / n );
      k = j;
   }
   return pdf;
}

/// Splits the CDF into k equal-mass strata and averages within each.
///
/// A support point that straddles a stratum boundary contributes its mass
/// proportionally to both sides. Returned probabilities are exactly 1/k.
inline std::vector<Stratum> stratify( const DiscretePdf& pdf, int k )
{
   if( k < 1 )
      throw std::invalid_argument( "stratify: k must be >= 1" );
   const std::size_t n = pdf.support.size();
   std::vector<double> upper( n );
   double acc = 0.0;
   for( std::size_t i = 0; i < n; ++i )
   {
      acc += pdf.probs[i];
      upper[i] = acc;
   }
   double total = acc;
   const double kk = static_cast<double>( k );

   std::vector<Stratum> out( static_cast<std::size_t>( k ) );
   std::size_t i = 0;
   double lower_i = 0.0;
   for( int s = 0; s < k; ++s )
   {
      double lo = total * s / kk;
      double hi = s + 1 == k ? total : total * ( s + 1 ) / kk;
      double mass = 0.0;
      double weighted = 0.0;
      while( i < n )
      {
         double a = std::max( lower_i, lo );
         double b = std::min( upper[i], hi );
         if( b > a )
         {
            mass += b - a;
            weighted += ( b - a ) * pdf.support[i];
         }
         if( upper[i] <= hi )
         {
            lower_i = upper[i];
            ++i;
         }
         else
            break;
      }
      double value;
      if( mass > 0.0 )
         value = weighted / mass;
      else
         value = pdf.support[std::min( i, n - 1 )];
      out[static_cast<std::size_t>( s )] = { value, 1.0 / kk };
   }
   return out;
}

/// Per-timestep stratification turned into K multiplier paths.
///
/// Scenario i takes stratum i of the load PDF at every timestep. Under
/// `rank` coupling it takes wind stratum i as well; under
/// `independent_pair` it takes wind stratum perm(i) for a seeded
/// permutation.
inline SystemScenarioSet build_scenario_paths( const PercentileForecast& load_fc, const PercentileForecast& wind_fc,
                                               int k, Coupling coupling, std::uint64_t seed = 0 )
{
   if( load_fc.horizon() != wind_fc.horizon() ||
       ( !load_fc.epoch_s.empty() && !wind_fc.epoch_s.empty() && load_fc.epoch_s != wind_fc.epoch_s ) )
      throw HorizonMismatch( fmt::format( "load forecast has {} steps, wind forecast {}; timestamps must match",
                                          load_fc.horizon(), wind_fc.horizon() ) );
   if( k < 1 )
      throw std::invalid_argument( "build_scenario_paths: k must be >= 1" );
   const std::size_t T = load_fc.horizon();
   const auto K = static_cast<std::size_t>( k );

   SystemScenarioSet out;
   out.probs.assign( K, 1.0 / static_cast<double>( k ) );
   out.load_path.assign( K, std::vector<double>( T ) );
   out.wind_path.assign( K, std::vector<double>( T ) );
   out.load_forecast = load_fc.median_path();
   out.wind_forecast = wind_fc.median_path();

   std::vector<int> perm( K );
   std::iota( perm.begin(), perm.end(), 0 );
   if( coupling == Coupling::independent_pair )
      perm = seeded_permutation( k, seed, 0x57494e44 );

   for( std::size_t t = 0; t < T; ++t )
   {
      auto ls = stratify( build_discrete_pdf( load_fc.values[t] ), k );
      auto ws = stratify( build_discrete_pdf( wind_fc.values[t] ), k );
      for( std::size_t i = 0; i < K; ++i )
      {
         out.load_path[i][t] = ls[i].value;
         out.wind_path[i][t] = ws[static_cast<std::size_t>( perm[i] )].value;
      }
   }
   return out;
}

// ---------------------------------------------------------------------------
// Spatial disaggregation

struct DisaggregationOptions
{
   double noise_sigma = 0.10;
   std::uint64_t seed = 0;
   /// Scales normalized load multipliers (system load level relative to nominal bus demand).
   double load_level = 1.0;
   /// Scales normalized wind multipliers (capacity factor at multiplier 1).
   double wind_level = 1.0;
   /// Rescale noisy bus loads so each (scenario, t) matches the system total.
   bool renormalize = false;
};

enum class NoiseKind : std::int64_t
{
   load = 1,
   wind = 2
};

/// Gaussian factor for one entity; the stream depends only on its coordinates.
inline double spatial_noise( std::uint64_t seed, NoiseKind kind, std::size_t scenario, std::size_t t,
                             std::uint64_t entity, double sigma )
{
   if( sigma == 0.0 )
      return 0.0;
   CounterRng rng( seed, { static_cast<std::int64_t>( kind ), static_cast<std::int64_t>( scenario ),
                           static_cast<std::int64_t>( t ), static_cast<std::int64_t>( entity ) } );
   return sigma * rng.normal();
}

inline std::uint64_t wind_entity_key( const WindPlant& w ) { return detail::fnv1a( w.id ); }

/// Bus loads and plant outputs per scenario, with multiplicative Gaussian noise.
inline ScenarioSet disaggregate_to_buses( const SystemScenarioSet& sys, const GridCase& c,
                                          const DisaggregationOptions& opt )
{
   if( !( opt.noise_sigma >= 0.0 ) )
      throw std::invalid_argument( "disaggregate_to_buses: noise_sigma must be >= 0" );
   const std::size_t K = sys.size();
   const std::size_t T = sys.horizon();
   const auto nb = static_cast<Eigen::Index>( c.buses.size() );
   const auto nw = static_cast<Eigen::Index>( c.wind_plants.size() );

   ScenarioSet out;
   out.seed = opt.seed;
   out.probs = sys.probs;
   out.forecast_load.resize( static_cast<Eigen::Index>( T ), nb );
   out.forecast_wind.resize( static_cast<Eigen::Index>( T ), nw );
   for( std::size_t t = 0; t < T; ++t )
   {
      const auto r = static_cast<Eigen::Index>( t );
      for( Eigen::Index i = 0; i < nb; ++i )
         out.forecast_load( r, i ) =
             c.buses[static_cast<std::size_t>( i )].demand_mw * opt.load_level * sys.load_forecast[t];
      for( Eigen::Index w = 0; w < nw; ++w )
      {
         double cap = c.wind_plants[static_cast<std::size_t>( w )].capacity_mw;
         out.forecast_wind( r, w ) = std::clamp( cap * opt.wind_level * sys.wind_forecast[t], 0.0, cap );
      }
   }

   out.load.resize( K );
   out.wind.resize( K );
   for( std::size_t k = 0; k < K; ++k )
   {
      auto& L = out.load[k];
      auto& W = out.wind[k];
      L.resize( static_cast<Eigen::Index>( T ), nb );
      W.resize( static_cast<Eigen::Index>( T ), nw );
      for( std::size_t t = 0; t < T; ++t )
      {
         const auto r = static_cast<Eigen::Index>( t );
         const double lm = opt.load_level * sys.load_path[k][t];
         double system_total = 0.0;
         double noisy_total = 0.0;
         for( Eigen::Index i = 0; i < nb; ++i )
         {
            const auto& bus = c.buses[static_cast<std::size_t>( i )];
            double eps = spatial_noise( opt.seed, NoiseKind::load, k, t, static_cast<std::uint64_t>( bus.id ),
                                        opt.noise_sigma );
            eps = std::max( eps, -1.0 );
            L( r, i ) = bus.demand_mw * lm * ( 1.0 + eps );
            system_total += bus.demand_mw * lm;
            noisy_total += L( r, i );
         }
         if( opt.renormalize && noisy_total > 0.0 )
            L.row( r ) *= system_total / noisy_total;

         const double wm = opt.wind_level * sys.wind_path[k][t];
         for( Eigen::Index w = 0; w < nw; ++w )
         {
            const auto& plant = c.wind_plants[static_cast<std::size_t>( w )];
            double eps = spatial_noise( opt.seed, NoiseKind::wind, k, t, wind_entity_key( plant ), opt.noise_sigma );
            W( r, w ) = plant.capacity_mw * wm * ( 1.0 + eps );
         }
         if( opt.renormalize && nw > 0 )
         {
            double target = 0.0;
            for( Eigen::Index w = 0; w < nw; ++w )
               target += c.wind_plants[static_cast<std::size_t>( w )].capacity_mw * wm;
            double noisy = W.row( r ).sum();
            if( noisy > 0.0 )
               W.row( r ) *= target / noisy;
         }
         for( Eigen::Index w = 0; w < nw; ++w )
            W( r, w ) = std::clamp( W( r, w ), 0.0, c.wind_plants[static_cast<std::size_t>( w )].capacity_mw );
      }
   }
   return out;
}

struct ScenarioOptions
{
   int k = 50;
   Coupling coupling = Coupling::rank;
   DisaggregationOptions disaggregation;
};

/// Full pipeline: percentile forecasts to bus-level scenarios.
inline ScenarioSet generate_scenarios( const PercentileForecast& load_fc, const PercentileForecast& wind_fc,
                                       const GridCase& c, const ScenarioOptions& opt )
{
   auto sys = build_scenario_paths( load_fc, wind_fc, opt.k, opt.coupling, opt.disaggregation.seed );
   return disaggregate_to_buses( sys, c, opt.disaggregation );
}

/// Writes `scenario,prob,t,entity_kind,entity_id,value_mw` rows.
inline void write_scenarios_csv( const ScenarioSet& s, const GridCase& c, std::ostream& out )
{
   out << "scenario,prob,t,entity_kind,entity_id,value_mw\n";
   for( std::size_t k = 0; k < s.size(); ++k )
      for( Eigen::Index t = 0; t < static_cast<Eigen::Index>( s.horizon() ); ++t )
      {
         for( std::size_t i = 0; i < c.buses.size(); ++i )
            out << fmt::format( "{},{},{},load,{},{}\n", k, s.probs[k], t, c.buses[i].id,
                                s.load[k]( t, static_cast<Eigen::Index>( i ) ) );
         for( std::size_t w = 0; w < c.wind_plants.size(); ++w )
            out << fmt::format( "{},{},{},wind,{},{}\n", k, s.probs[k], t, c.wind_plants[w].id,
                                s.wind[k]( t, static_cast<Eigen::Index>( w ) ) );
      }
}

inline void write_scenarios_csv( const ScenarioSet& s, const GridCase& c, const std::filesystem::path& path )
{
   std::ofstream out( path );
   if( !out )
      throw IoError( fmt::format( "cannot write scenario file '{}'", path.string() ) );
   write_scenarios_csv( s, c, out );
}

} // namespace sded
