#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sded/cli/commands.hpp"
#include "sded/milp/external.hpp"

using namespace sded;
using namespace sded::cli;
namespace fs = std::filesystem;

namespace
{

const fs::path kSource = SDED_SOURCE_DIR;
const fs::path kThreeBusConfig = kSource / "configs" / "three_bus.json";

fs::path scratch( const std::string& name )
{
   auto dir = fs::temp_directory_path() / fmt::format( "sded-cli-test-{}", ::getpid() ) / name;
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

struct Run
{
   int code = -1;
   std::string output; // stdout and stderr
};

/// Runs the sded binary through the shell; `env` is a prefix like "SDED_SEED=3 ".
Run run_cli( const std::string& args, const std::string& env = "" )
{
   const std::string cli = fixtures::cli_path();
   std::string cmd = fmt::format( "{}{} {} 2>&1", env, milp::detail::shell_quote( cli ), args );
   Run r;
   FILE* p = ::popen( cmd.c_str(), "r" );
   if( p == nullptr )
      return r;
   std::array<char, 4096> buf{};
   while( std::size_t n = std::fread( buf.data(), 1, buf.size(), p ) )
      r.output.append( buf.data(), n );
   int status = ::pclose( p );
   r.code = WIFEXITED( status ) ? WEXITSTATUS( status ) : -1;
   return r;
}

std::string q( const fs::path& p ) { return milp::detail::shell_quote( p.string() ); }

RunConfig three_bus_config( const fs::path& out )
{
   auto cfg = load_config( kThreeBusConfig );
   cfg.out_dir = out;
   return cfg;
}

/// Config file pointing at the bundled three-bus data, with extra JSON merged in.
fs::path write_config( const fs::path& dir, const nlohmann::json& patch )
{
   std::ifstream in( kThreeBusConfig );
   nlohmann::json j;
   in >> j;
   j["case"] = ( kSource / "data" / "three_bus.case.json" ).string();
   j["forecasts"]["load"] = ( kSource / "data" / "forecasts" / "three_bus_load.csv" ).string();
   j["forecasts"]["wind"] = ( kSource / "data" / "forecasts" / "three_bus_wind.csv" ).string();
   j["output"] = ( dir / "out" ).string();
   j.merge_patch( patch );
   auto p = dir / "config.json";
   std::ofstream( p ) << j.dump( 2 );
   return p;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST( Config, BundledThreeBusFixtureMatchesCode )
{
   EXPECT_EQ( load_case( kSource / "data" / "three_bus.case.json" ), fixtures::three_bus_case() );
}

TEST( Config, DefaultsMirrorStudyParameters )
{
   RunConfig cfg;
   EXPECT_EQ( cfg.scenarios.k, 50 );
   EXPECT_EQ( cfg.scenarios.disaggregation.noise_sigma, 0.10 );
   EXPECT_EQ( cfg.costs.c_wind_curtail, 100.0 );
   EXPECT_EQ( cfg.costs.c_load_curtail, 3000.0 );
   EXPECT_EQ( cfg.costs.c_gen_curtail, 400.0 );
   EXPECT_EQ( cfg.costs.c_charge, 10.0 );
   EXPECT_EQ( cfg.costs.c_discharge, 10.0 );
   EXPECT_EQ( cfg.costs.regulation_multiplier, 1.5 );
   EXPECT_EQ( cfg.costs.dt_hours, 0.25 );
   EXPECT_EQ( cfg.duration_hours, 4.0 );

   auto ieee = load_config( kSource / "configs" / "ieee39.json" );
   EXPECT_TRUE( ieee.validate().empty() );
   EXPECT_EQ( ieee.scenarios.k, 50 );
   EXPECT_EQ( ieee.sweep_configs.size(), 4u );
   EXPECT_EQ( ieee.sweep_sizes_mw.size(), 7u );
   EXPECT_EQ( ieee.bess_buses, ( std::vector<BusId>{ 21, 28 } ) );
   EXPECT_TRUE( fs::exists( ieee.case_path ) );
   EXPECT_TRUE( fs::exists( ieee.load_forecast ) );
}

TEST( Config, RelativePathsResolveAgainstConfigFile )
{
   auto cfg = load_config( kThreeBusConfig );
   EXPECT_EQ( cfg.case_path, ( kSource / "data" / "three_bus.case.json" ).lexically_normal() );
   EXPECT_EQ( cfg.out_dir, ( kSource / "out" / "three_bus" ).lexically_normal() );
}

TEST( Config, RejectsUnknownKeysAndBadValues )
{
   EXPECT_THROW( config_from_json( { { "scenario", { { "k", 3 } } } } ), ConfigError );
   EXPECT_THROW( config_from_json( { { "costs", { { "c_wnd", 3 } } } } ), ConfigError );
   EXPECT_THROW( config_from_json( { { "scenarios", { { "k", "many" } } } } ), ConfigError );
   EXPECT_THROW( config_from_json( { { "scenarios", { { "coupling", "copula" } } } } ), ConfigError );
   EXPECT_THROW( config_from_json( { { "solver", { { "name", "cplex" } } } } ), ConfigError );

   auto cfg = config_from_json( { { "scenarios", { { "k", 0 }, { "noise_sigma", -1 } } } } );
   auto errs = cfg.validate();
   EXPECT_GE( errs.size(), 4u ); // no case, no forecasts, k, sigma
   EXPECT_THROW( cfg.require_valid(), ConfigError );
}

TEST( Config, EnvironmentOverrides )
{
   auto cfg = load_config( kThreeBusConfig );
   std::map<std::string, std::string> env = { { "SDED_SEED", "99" },          { "SDED_SOLVER", "internal-fastpath" },
                                              { "SDED_SCENARIOS", "3" },       { "SDED_NOISE_SIGMA", "0" },
                                              { "SDED_WORKERS", "2" },         { "SDED_OUT", "/tmp/x" },
                                              { "SDED_REL_GAP", "1e-3" } };
   apply_env_overrides( cfg, [&]( const std::string& k ) -> std::optional<std::string> {
      auto it = env.find( k );
      return it == env.end() ? std::nullopt : std::optional<std::string>( it->second );
   } );
   EXPECT_EQ( cfg.seed(), 99u );
   EXPECT_EQ( cfg.solver.kind, SolverKind::internal_fastpath );
   EXPECT_EQ( cfg.scenarios.k, 3 );
   EXPECT_EQ( cfg.scenarios.disaggregation.noise_sigma, 0.0 );
   EXPECT_EQ( cfg.workers, 2 );
   EXPECT_EQ( cfg.out_dir, fs::path( "/tmp/x" ) );
   EXPECT_EQ( cfg.mip.rel_gap, 1e-3 );

   auto bad = [&]( const char* v ) {
      return [v]( const std::string& k ) -> std::optional<std::string> {
         return k == "SDED_SCENARIOS" ? std::optional<std::string>( v ) : std::nullopt;
      };
   };
   EXPECT_THROW( apply_env_overrides( cfg, bad( "12x" ) ), ConfigError );
   EXPECT_THROW( apply_env_overrides( cfg, bad( "lots" ) ), ConfigError );
}

TEST( Config, ExitCodeMapping )
{
   EXPECT_EQ( exit_code_for( ConfigError( "x" ) ), 1 );
   EXPECT_EQ( exit_code_for( std::runtime_error( "x" ) ), 1 );
   EXPECT_EQ( exit_code_for( IoError( "x" ) ), 2 );
   EXPECT_EQ( exit_code_for( ParseError( "x" ) ), 2 );
   EXPECT_EQ( exit_code_for( SolveFailure( "x" ) ), 3 );
   EXPECT_EQ( exit_code_for( BackendFailure( "x" ) ), 3 );
}

// ---------------------------------------------------------------------------
// Commands in-process

TEST( Commands, SingleScenarioWithoutNoiseIsMeanPath )
{
   auto cfg = three_bus_config( scratch( "mean" ) );
   cfg.scenarios.k = 1;
   cfg.scenarios.disaggregation.noise_sigma = 0.0;
   auto r = cmd_scenarios( cfg );
   EXPECT_EQ( r.manifest["scenarios"]["k"], 1 );

   auto load = load_percentile_forecasts( cfg.load_forecast, SeriesKind::load );
   std::ifstream in( cfg.out_dir / "scenarios.csv" );
   std::string line;
   std::getline( in, line );
   int rows = 0;
   while( std::getline( in, line ) )
   {
      ++rows;
      std::istringstream ls( line );
      std::string k, prob, t, kind, id, value;
      std::getline( ls, k, ',' );
      std::getline( ls, prob, ',' );
      std::getline( ls, t, ',' );
      std::getline( ls, kind, ',' );
      std::getline( ls, id, ',' );
      std::getline( ls, value, ',' );
      EXPECT_EQ( prob, "1" );
      if( kind == "load" && id == "2" )
      {
         double mean = build_discrete_pdf( load.values[std::stoul( t )] ).mean();
         EXPECT_NEAR( std::stod( value ), 150.0 * mean, 1e-9 );
      }
   }
   EXPECT_EQ( rows, 2 * 4 );
}

TEST( Commands, SolveMatchesEnumeration )
{
   auto cfg = three_bus_config( scratch( "solve" ) );
   cfg.scenarios.k = 2; // 12 indicators
   cfg.solver = SolverChoice::parse( "internal" );
   auto r = cmd_solve( cfg );
   auto sol = nlohmann::json::parse( slurp( cfg.out_dir / "solution.json" ) );
   EXPECT_EQ( sol["status"], "optimal" );
   EXPECT_TRUE( sol["verification"]["passed"].get<bool>() );

   auto grid = load_case( cfg.case_path );
   auto load = load_percentile_forecasts( cfg.load_forecast, SeriesKind::load );
   auto wind = load_percentile_forecasts( cfg.wind_forecast, SeriesKind::wind );
   auto scen = generate_scenarios( load, wind, grid, cfg.scenarios );
   auto ef = build_extensive_form( grid, scen, cfg.costs, cfg.model );
   ASSERT_EQ( ef.model.num_binaries(), 12 );
   auto oracle = milp::enumerate_solve( ef.model );
   double obj = sol["objective"].get<double>();
   EXPECT_LE( std::abs( obj - oracle.objective ), 1e-6 * std::max( 1.0, std::abs( oracle.objective ) ) );
   EXPECT_LE( sol["gap"].get<double>(), 1e-6 );
   EXPECT_TRUE( r.manifest["outputs"].contains( "solve_dispatch.csv" ) );
}

TEST( Commands, ExportedModelSolvesToSameObjective )
{
   auto cfg = three_bus_config( scratch( "mps" ) );
   cfg.scenarios.k = 2;
   cmd_export_mps( cfg );
   auto model = milp::read_mps( cfg.out_dir / "model.mps" );
   auto from_file = milp::branch_and_bound( model );
   cmd_solve( cfg );
   auto sol = nlohmann::json::parse( slurp( cfg.out_dir / "solution.json" ) );
   double internal = sol["objective"].get<double>();
   EXPECT_LE( std::abs( from_file.objective - internal ), 1e-6 * std::abs( internal ) );

   const std::string backend = fixtures::external_backend();
   if( backend.empty() )
      GTEST_SKIP() << "no external backend configured";
   auto ext = milp::solve_external( model, backend );
   EXPECT_LE( std::abs( ext.objective - internal ), 1e-6 * std::abs( internal ) );
}

TEST( Commands, SweepStorageNeverCostsMore )
{
   auto cfg = three_bus_config( scratch( "sweep" ) );
   cmd_sweep( cfg );
   std::ifstream in( cfg.out_dir / "sweep.csv" );
   auto r = parse_sweep_csv( in );
   ASSERT_EQ( r.cells.size(), 2u );
   ASSERT_TRUE( r.cells[0].ok && r.cells[1].ok );
   EXPECT_LE( r.cells[1].expected_cost, r.cells[0].expected_cost );
}

TEST( Commands, SweepRequiresConfigs )
{
   auto cfg = three_bus_config( scratch( "nosweep" ) );
   cfg.sweep_configs.clear();
   EXPECT_THROW( cmd_sweep( cfg ), ConfigError );
}

TEST( Commands, ReportRebuildsCurves )
{
   auto cfg = three_bus_config( scratch( "report" ) );
   cmd_sweep( cfg );
   auto table = []( const fs::path& p ) {
      std::ifstream in( p );
      std::string line;
      std::vector<std::vector<std::string>> rows;
      while( std::getline( in, line ) )
      {
         std::vector<std::string> f;
         std::istringstream ls( line );
         for( std::string cell; std::getline( ls, cell, ',' ); )
            f.push_back( cell );
         rows.push_back( f );
      }
      return rows;
   };
   auto before = table( cfg.out_dir / "savings_curve.csv" );
   fs::remove( cfg.out_dir / "savings_curve.csv" );
   std::FILE* devnull = std::fopen( "/dev/null", "w" );
   cmd_report( cfg, devnull );
   std::fclose( devnull );

   // Savings are recomputed from costs stored at 6 significant digits.
   auto after = table( cfg.out_dir / "savings_curve.csv" );
   ASSERT_EQ( after.size(), before.size() );
   EXPECT_EQ( after[0], before[0] );
   for( std::size_t i = 1; i < after.size(); ++i )
   {
      ASSERT_EQ( after[i].size(), before[i].size() );
      EXPECT_EQ( after[i][0], before[i][0] );
      for( std::size_t j = 1; j < after[i].size(); ++j )
      {
         double a = std::stod( after[i][j] ), b = std::stod( before[i][j] );
         EXPECT_NEAR( a, b, 1e-4 * std::max( 1.0, std::abs( b ) ) ) << "row " << i << " column " << j;
      }
   }
}

// ---------------------------------------------------------------------------
// The binary

TEST( Binary, HelpAndVersion )
{
   auto r = run_cli( "--help" );
   EXPECT_EQ( r.code, 0 ) << r.output;
   EXPECT_NE( r.output.find( "export-mps" ), std::string::npos );
   EXPECT_NE( r.output.find( "SDED_SEED" ), std::string::npos );
   EXPECT_EQ( run_cli( "--version" ).code, 0 );
}

TEST( Binary, ScenariosWritesCsvAndManifest )
{
   auto dir = scratch( "bin-scen" );
   auto r = run_cli( fmt::format( "scenarios --config {} --out {} --seed 11", q( kThreeBusConfig ), q( dir ) ) );
   ASSERT_EQ( r.code, 0 ) << r.output;
   EXPECT_TRUE( fs::exists( dir / "scenarios.csv" ) );
   auto m = nlohmann::json::parse( slurp( dir / "scenarios.manifest.json" ) );
   EXPECT_EQ( m["seed"], 11 );
   EXPECT_EQ( m["scenarios"]["k"], 4 );
   EXPECT_EQ( m["scenarios"]["coupling"], "rank" );
   EXPECT_TRUE( m["inputs"].contains( "three_bus_load.csv" ) );
   EXPECT_TRUE( m["outputs"].contains( "scenarios.csv" ) );
}

TEST( Binary, FlagsOverrideEnvironmentOverrideConfig )
{
   auto dir = scratch( "bin-prec" );
   auto r = run_cli( fmt::format( "scenarios -c {} -o {} --seed 5", q( kThreeBusConfig ), q( dir ) ),
                     "SDED_SEED=4 SDED_SCENARIOS=2 " );
   ASSERT_EQ( r.code, 0 ) << r.output;
   auto m = nlohmann::json::parse( slurp( dir / "scenarios.manifest.json" ) );
   EXPECT_EQ( m["seed"], 5 );
   EXPECT_EQ( m["scenarios"]["k"], 2 );
}

TEST( Binary, MissingForecastExitsTwo )
{
   auto dir = scratch( "bin-missing" );
   auto cfg = write_config( dir, { { "forecasts", { { "load", ( dir / "absent_load.csv" ).string() } } } } );
   auto r = run_cli( fmt::format( "scenarios -c {}", q( cfg ) ) );
   EXPECT_EQ( r.code, 2 ) << r.output;
   EXPECT_NE( r.output.find( "absent_load.csv" ), std::string::npos ) << r.output;
   EXPECT_FALSE( fs::exists( dir / "out" / "scenarios.csv" ) );
}

TEST( Binary, ConfigErrorsExitOne )
{
   auto dir = scratch( "bin-config" );
   auto cfg = write_config( dir, { { "scenarios", { { "k", 0 } } } } );
   EXPECT_EQ( run_cli( fmt::format( "solve -c {}", q( cfg ) ) ).code, 1 );
   EXPECT_EQ( run_cli( fmt::format( "solve -c {} --solver cplex", q( kThreeBusConfig ) ) ).code, 1 );
   EXPECT_EQ( run_cli( "solve --no-such-flag" ).code, 1 );
   EXPECT_EQ( run_cli( "" ).code, 1 );
   EXPECT_EQ( run_cli( "solve" ).code, 1 ); // no config at all
   std::ofstream( dir / "broken.json" ) << "{ \"case\": ";
   EXPECT_EQ( run_cli( fmt::format( "solve -c {}", q( dir / "broken.json" ) ) ).code, 1 );
}

TEST( Binary, SolveFailureExitsThree )
{
   auto dir = scratch( "bin-fail" );
   auto r = run_cli( fmt::format( "solve -c {} -o {} --solver external:false", q( kThreeBusConfig ), q( dir ) ) );
   EXPECT_EQ( r.code, 3 ) << r.output;
   EXPECT_FALSE( fs::exists( dir / "solution.json" ) );
}

TEST( Binary, SweepIsByteIdenticalAcrossRunsAndWorkers )
{
   auto a = scratch( "bin-sweep-a" );
   auto b = scratch( "bin-sweep-b" );
   auto ra = run_cli( fmt::format( "sweep -c {} -o {} -j 1", q( kThreeBusConfig ), q( a ) ) );
   auto rb = run_cli( fmt::format( "sweep -c {} -o {} -j 2", q( kThreeBusConfig ), q( b ) ) );
   ASSERT_EQ( ra.code, 0 ) << ra.output;
   ASSERT_EQ( rb.code, 0 ) << rb.output;
   for( const char* f : { "sweep.csv", "dispatch.csv", "curtailment_curve.csv", "savings_curve.csv" } )
      EXPECT_EQ( slurp( a / f ), slurp( b / f ) ) << f;
}

TEST( Binary, ReportWithoutSweepExitsTwo )
{
   auto dir = scratch( "bin-report" );
   auto r = run_cli( fmt::format( "report -o {}", q( dir ) ) );
   EXPECT_EQ( r.code, 2 ) << r.output;
   EXPECT_NE( r.output.find( "sweep.csv" ), std::string::npos );
}

TEST( Binary, ExportMps )
{
   auto dir = scratch( "bin-mps" );
   auto r = run_cli( fmt::format( "export-mps -c {} -o {}", q( kThreeBusConfig ), q( dir ) ) );
   ASSERT_EQ( r.code, 0 ) << r.output;
   auto m = nlohmann::json::parse( slurp( dir / "export-mps.manifest.json" ) );
   EXPECT_EQ( m["binaries"], 2 * 2 * ( 1 + 4 ) );
   EXPECT_NO_THROW( milp::read_mps( dir / "model.mps" ) );
}
