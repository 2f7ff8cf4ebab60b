// sded: scenarios, solve, sweep, export-mps and report over one JSON config.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sded/cli/commands.hpp"

using namespace sded;
using namespace sded::cli;

namespace
{

struct Overrides
{
   std::string config;
   std::optional<std::uint64_t> seed;
   std::optional<std::string> solver;
   std::optional<std::string> out;
   std::optional<int> scenarios;
   std::optional<int> workers;
};

void add_common( CLI::App* cmd, Overrides& o )
{
   cmd->add_option( "-c,--config", o.config, "JSON run configuration" );
   cmd->add_option( "--seed", o.seed, "scenario noise seed" );
   cmd->add_option( "--solver", o.solver, "internal | internal-fastpath | external:<cmd>" );
   cmd->add_option( "-o,--out", o.out, "output directory" );
   cmd->add_option( "-k,--scenarios", o.scenarios, "number of scenarios" );
   cmd->add_option( "-j,--workers", o.workers, "parallel sweep cells" );
}

RunConfig resolve( const Overrides& o )
{
   RunConfig cfg = o.config.empty() ? RunConfig{} : load_config( o.config );
   apply_env_overrides( cfg );
   if( o.seed )
      cfg.set_seed( *o.seed );
   if( o.solver )
      cfg.solver = SolverChoice::parse( *o.solver );
   if( o.out )
      cfg.out_dir = *o.out;
   if( o.scenarios )
      cfg.scenarios.k = *o.scenarios;
   if( o.workers )
      cfg.workers = *o.workers;
   return cfg;
}

} // namespace

int main( int argc, char** argv )
{
   CLI::App app{ "Two-stage stochastic economic dispatch with storage" };
   app.set_version_flag( "--version", std::string( kVersion ) );
   app.require_subcommand( 1 );
   app.footer( "Environment overrides (between config file and flags): SDED_SEED, SDED_SOLVER, SDED_OUT,\n"
               "SDED_SCENARIOS, SDED_NOISE_SIGMA, SDED_WORKERS, SDED_REL_GAP.\n"
               "Exit codes: 0 ok, 1 configuration error, 2 missing or invalid input, 3 solve failure." );

   Overrides o;
   auto* scen = app.add_subcommand( "scenarios", "write the bus-level scenario CSV" );
   auto* solve = app.add_subcommand( "solve", "solve one case variant and write its dispatch" );
   auto* sweep = app.add_subcommand( "sweep", "run the penetration x storage-size sweep" );
   auto* mps = app.add_subcommand( "export-mps", "write the extensive form as an MPS file" );
   auto* report = app.add_subcommand( "report", "rebuild curve CSVs from sweep.csv and print a summary" );
   for( auto* cmd : { scen, solve, sweep, mps, report } )
      add_common( cmd, o );

   try
   {
      app.parse( argc, argv );
   }
   catch( const CLI::CallForHelp& e )
   {
      return app.exit( e );
   }
   catch( const CLI::CallForAllHelp& e )
   {
      return app.exit( e );
   }
   catch( const CLI::CallForVersion& e )
   {
      return app.exit( e );
   }
   catch( const CLI::ParseError& e )
   {
      app.exit( e );
      return exit_config;
   }

   try
   {
      RunConfig cfg = resolve( o );
      CommandResult r;
      if( scen->parsed() )
         r = cmd_scenarios( cfg );
      else if( solve->parsed() )
         r = cmd_solve( cfg );
      else if( sweep->parsed() )
         r = cmd_sweep( cfg );
      else if( mps->parsed() )
         r = cmd_export_mps( cfg );
      else
         r = cmd_report( cfg );
      for( const auto& p : r.written )
         fmt::print( stderr, "wrote {}\n", p.string() );
      return exit_ok;
   }
   catch( const std::exception& e )
   {
      fmt::print( stderr, "sded: {}\n", e.what() );
      return exit_code_for( e );
   }
}
