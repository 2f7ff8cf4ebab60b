#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sded/experiments.hpp"

using namespace sded;
namespace fs = std::filesystem;

namespace
{

const fs::path kForecasts = fs::path( SDED_SOURCE_DIR ) / "data" / "forecasts";

fs::path scratch( const std::string& name )
{
   auto dir = fs::temp_directory_path() / fmt::format( "sded-exp-test-{}", ::getpid() ) / name;
   fs::remove_all( dir );
   fs::create_directories( dir );
   return dir;
}

std::string slurp( const fs::path& p )
{
   std::ifstream in( p, std::ios::binary );
   std::ostringstream s;
   s << in.rdbuf();
   return s.str();
}

struct ThreeBusSweep
{
   GridCase base;
   PercentileForecast load, wind;
   SweepSpec spec;

   ThreeBusSweep()
   {
      base = fixtures::three_bus_case();
      base.storage_units.clear();
      load = load_percentile_forecasts( kForecasts / "three_bus_load.csv", SeriesKind::load );
      wind = load_percentile_forecasts( kForecasts / "three_bus_wind.csv", SeriesKind::wind );
      spec.configs = { { "base", {} }, { "twin", {} } };
      spec.bess_sizes_mw = { 0.0, 10.0, 20.0, 40.0 };
      spec.bess_buses = { 3 };
      spec.scenarios.k = 4;
      spec.scenarios.disaggregation.seed = 7;
      spec.scenarios.disaggregation.load_level = 1.0;
      spec.scenarios.disaggregation.wind_level = 0.9;
      spec.costs.c_wind_curtail = 100.0;
   }

   SweepResult run() const { return run_sweep( spec, base, load, wind ); }
};

std::string sweep_csv( const SweepResult& r )
{
   std::ostringstream s;
   write_sweep_csv( r, s );
   return s.str();
}

CellResult cell( const std::string& cfg, double mw, double cost )
{
   CellResult c;
   c.config = cfg;
   c.bess_mw = mw;
   c.ok = true;
   c.expected_cost = cost;
   return c;
}

} // namespace

// ---------------------------------------------------------------------------
// Savings

TEST( Savings, PublishedPair )
{
   auto s = savings( 191836.0, 176906.0 );
   EXPECT_DOUBLE_EQ( s.abs, 14930.0 );
   EXPECT_NEAR( s.pct, 7.78, 0.01 );
}

TEST( Savings, TrivialCases )
{
   EXPECT_DOUBLE_EQ( savings( 200000.0, 150000.0 ).pct, 25.0 );
   EXPECT_EQ( savings( 1234.5, 1234.5 ).abs, 0.0 );
   EXPECT_EQ( savings( 1234.5, 1234.5 ).pct, 0.0 );
}

TEST( Savings, ComputeSavingsFillsEveryCell )
{
   SweepResult r;
   r.cells = { cell( "20%", 0.0, 191836.0 ), cell( "20%", 60.0, 176906.0 ), cell( "10%", 0.0, 200000.0 ),
               cell( "10%", 20.0, 150000.0 ) };
   compute_savings( r );
   EXPECT_EQ( r.cells[0].savings_abs, 0.0 );
   EXPECT_EQ( r.cells[0].savings_pct, 0.0 );
   EXPECT_DOUBLE_EQ( r.cells[1].savings_abs, 14930.0 );
   EXPECT_NEAR( r.cells[1].savings_pct, 7.78, 0.01 );
   EXPECT_DOUBLE_EQ( r.cells[3].savings_pct, 25.0 );
}

TEST( Savings, MissingBaseline )
{
   SweepResult r;
   r.cells = { cell( "20%", 20.0, 1.0 ) };
   EXPECT_THROW( compute_savings( r ), MissingBaseline );
   r.cells.push_back( cell( "20%", 0.0, 2.0 ) );
   r.cells.back().ok = false;
   EXPECT_THROW( compute_savings( r ), MissingBaseline );
}

TEST( Savings, ExpectedRecourseAggregation )
{
   auto c = fixtures::three_bus_case();
   CostParams costs;
   costs.dt_hours = 1.0;
   DispatchSolution d;
   d.probs = { 0.5, 0.5 };
   d.gen = Eigen::MatrixXd::Zero( 1, 2 );
   auto zero = [&]( ScenarioDispatch& s ) {
      for( auto* m : { &s.charge, &s.discharge, &s.load_curtail, &s.gen_curtail } )
         *m = Eigen::MatrixXd::Zero( 1, 1 );
      s.gen_curtail = Eigen::MatrixXd::Zero( 1, 2 );
      s.load_curtail = Eigen::MatrixXd::Zero( 1, 3 );
      s.reg_up = s.reg_down = Eigen::MatrixXd::Zero( 1, 2 );
   };
   d.scenarios.resize( 2 );
   for( auto& s : d.scenarios )
      zero( s );
   d.scenarios[0].wind_curtail = Eigen::MatrixXd::Constant( 1, 1, 1.0 );
   d.scenarios[1].wind_curtail = Eigen::MatrixXd::Constant( 1, 1, 2.0 );
   EXPECT_DOUBLE_EQ( scenario_cost( c, costs, d.scenarios[0] ), 100.0 );
   EXPECT_DOUBLE_EQ( scenario_cost( c, costs, d.scenarios[1] ), 200.0 );
   d.first = d.scenarios[0];
   d.first.wind_curtail.setZero();
   EXPECT_DOUBLE_EQ( compute_costs( c, costs, d ).expected_recourse, 150.0 );
}

// ---------------------------------------------------------------------------
// Sweeps on the three-bus system

TEST( Sweep, CostNonincreasingInStorage )
{
   ThreeBusSweep f;
   f.spec.configs.resize( 1 );
   auto r = f.run();
   ASSERT_EQ( r.cells.size(), 4u );
   const double wind_energy_cap = 100.0 * 2 * f.spec.costs.dt_hours;
   for( std::size_t i = 0; i < r.cells.size(); ++i )
   {
      const auto& c = r.cells[i];
      ASSERT_TRUE( c.ok ) << c.message;
      EXPECT_GE( c.expected_wind_curtailment_mwh, 0.0 );
      EXPECT_LE( c.expected_wind_curtailment_mwh, wind_energy_cap );
      if( i > 0 )
      {
         EXPECT_LE( c.expected_cost, r.cells[i - 1].expected_cost * ( 1.0 + 1e-9 ) );
      }
   }
   EXPECT_EQ( r.cells[0].savings_abs, 0.0 );
   EXPECT_NEAR( r.cells[3].savings_abs, r.cells[0].expected_cost - r.cells[3].expected_cost, 1e-9 );
   ASSERT_TRUE( r.dispatch.has_value() );
   EXPECT_EQ( r.dispatch->size(), 2u );
}

TEST( Sweep, ReportedCostMatchesObjectiveComponents )
{
   ThreeBusSweep f;
   auto c = sweep_case( f.base, f.spec, 0, 20.0 );
   ASSERT_EQ( c.storage_units.size(), 1u );
   EXPECT_EQ( c.storage_units[0].energy_cap_mwh, 80.0 );
   auto scen = generate_scenarios( f.load, f.wind, c, f.spec.scenarios );
   auto rep = solve_dispatch( c, scen, f.spec.costs, f.spec.solve );
   EXPECT_NEAR( rep.dispatch.cost.total, rep.raw.objective, 1e-6 * std::abs( rep.raw.objective ) );
   double recourse = 0.0;
   for( std::size_t k = 0; k < scen.size(); ++k )
      recourse += scen.probs[k] * scenario_cost( c, f.spec.costs, rep.dispatch.scenarios[k] );
   EXPECT_NEAR( rep.dispatch.cost.expected_recourse, recourse, 1e-9 );
}

TEST( Sweep, SavingsPercentScaleInvariant )
{
   ThreeBusSweep f;
   f.spec.configs.resize( 1 );
   auto a = f.run();
   for( auto& g : f.base.generators )
   {
      g.cost_a *= 2.0;
      g.cost_b *= 2.0;
      g.cost_c *= 2.0;
   }
   auto& k = f.spec.costs;
   for( double* v : { &k.c_wind_curtail, &k.c_load_curtail, &k.c_gen_curtail, &k.c_charge, &k.c_discharge } )
      *v *= 2.0;
   auto b = f.run();
   ASSERT_EQ( a.cells.size(), b.cells.size() );
   for( std::size_t i = 0; i < a.cells.size(); ++i )
   {
      EXPECT_NEAR( b.cells[i].expected_cost, 2.0 * a.cells[i].expected_cost, 1e-6 * a.cells[i].expected_cost );
      EXPECT_NEAR( b.cells[i].savings_pct, a.cells[i].savings_pct, 1e-6 );
   }
}

TEST( Sweep, IndependentOfWorkerCount )
{
   ThreeBusSweep f;
   f.spec.workers = 1;
   auto one = f.run();
   f.spec.workers = 3;
   auto three = f.run();
   EXPECT_EQ( sweep_csv( one ), sweep_csv( three ) );
   EXPECT_EQ( one.dispatch, three.dispatch );
   EXPECT_EQ( one.cells.size(), 8u );
}

TEST( Sweep, FailedCellsAreRecorded )
{
   ThreeBusSweep f;
   f.spec.configs = { { "bad", { "G9" } }, { "base", {} } };
   f.spec.bess_sizes_mw = { 0.0 };
   auto r = f.run();
   ASSERT_EQ( r.cells.size(), 2u );
   EXPECT_FALSE( r.cells[0].ok );
   EXPECT_NE( r.cells[0].message.find( "G9" ), std::string::npos );
   EXPECT_TRUE( r.cells[1].ok );
}

TEST( Sweep, InvalidSpecIsRejected )
{
   ThreeBusSweep f;
   f.spec.bess_sizes_mw = { -5.0 };
   f.spec.configs.clear();
   EXPECT_THROW( f.run(), ValidationError );
}

TEST( DispatchTable, DemandDropShowsChargingAndCurtailment )
{
   auto [c, scen] = fixtures::demand_drop_fixture( 20.0 );
   CostParams costs;
   auto rep = solve_dispatch( c, scen, costs );
   auto rows = dispatch_table( rep.dispatch, scen );
   ASSERT_EQ( rows.size(), 4u );
   EXPECT_DOUBLE_EQ( rows[2].demand, 1200.0 );
   EXPECT_DOUBLE_EQ( rows[2].wind_available, 500.0 );
   EXPECT_GT( rows[2].wind_curtailment, 1.0 );
   EXPECT_LT( rows[2].battery, -1.0 );
   for( const auto& r : rows )
      EXPECT_NEAR( r.conventional + r.wind_available - r.wind_curtailment + r.battery, r.demand, 1e-5 );
}

// ---------------------------------------------------------------------------
// Report files

TEST( Report, WritesFourFilesAndRoundTrips )
{
   ThreeBusSweep f;
   auto r = f.run();
   r.cells[1].message = "note, with \"quotes\"";
   auto dir = scratch( "report" );
   auto files = emit_report( r, dir );
   ASSERT_EQ( files.size(), 4u );
   for( const char* name : { "sweep.csv", "dispatch.csv", "curtailment_curve.csv", "savings_curve.csv" } )
      EXPECT_TRUE( fs::exists( dir / name ) ) << name;

   std::ifstream in( dir / "sweep.csv" );
   auto back = parse_sweep_csv( in );
   EXPECT_EQ( back.cells, csv_rounded( r ).cells );

   std::ifstream din( dir / "dispatch.csv" );
   auto rows = parse_dispatch_csv( din );
   ASSERT_EQ( rows.size(), r.dispatch->size() );
   EXPECT_EQ( rows[0].t, 0 );
   EXPECT_NEAR( rows[1].demand, ( *r.dispatch )[1].demand, 1e-5 * ( *r.dispatch )[1].demand );

   // Emitting the parsed copy reproduces the file byte for byte.
   auto dir2 = scratch( "report2" );
   emit_report( back, r.dispatch, dir2 );
   EXPECT_EQ( slurp( dir / "sweep.csv" ), slurp( dir2 / "sweep.csv" ) );
}

TEST( Report, EmptySweepWritesHeadersOnly )
{
   auto dir = scratch( "empty" );
   emit_report( SweepResult{}, dir );
   EXPECT_EQ( slurp( dir / "sweep.csv" ), std::string( kSweepHeader ) + "\n" );
   EXPECT_EQ( slurp( dir / "dispatch.csv" ), std::string( kDispatchHeader ) + "\n" );
   EXPECT_EQ( slurp( dir / "curtailment_curve.csv" ), std::string( kCurtailmentHeader ) + "\n" );
   EXPECT_EQ( slurp( dir / "savings_curve.csv" ), std::string( kSavingsHeader ) + "\n" );
}

TEST( Report, SixSignificantDigits )
{
   SweepResult r;
   r.cells = { cell( "x", 20.0, 191836.123456 ) };
   r.cells[0].expected_wind_curtailment_mwh = -0.0;
   auto text = sweep_csv( r );
   EXPECT_NE( text.find( "x,0,20,ok,191836,0,0,0,0,0,0,\n" ), std::string::npos ) << text;
}

TEST( Report, MalformedCsvIsRejected )
{
   std::istringstream bad_header( "config,cost\n" );
   EXPECT_THROW( parse_sweep_csv( bad_header ), ParseError );
   std::istringstream short_row( std::string( kSweepHeader ) + "\nx,1,2\n" );
   EXPECT_THROW( parse_sweep_csv( short_row ), ParseError );
   std::istringstream bad_status( std::string( kSweepHeader ) + "\nx,0,0,maybe,1,0,0,0,0,0,0,\n" );
   EXPECT_THROW( parse_sweep_csv( bad_status ), ParseError );
}

TEST( Report, UnwritableDirectory )
{
   auto dir = scratch( "blocked" );
   std::ofstream( dir / "file" ) << "x";
   EXPECT_THROW( emit_report( SweepResult{}, dir / "file" / "sub" ), IoError );
}
