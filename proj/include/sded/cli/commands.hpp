#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sded/cli/config.hpp"
#include "sded/experiments.hpp"
#include "sded/formulation/verify.hpp"
#include "sded/milp/mps.hpp"
#include "sded/version.hpp"

namespace sded::cli
{

enum ExitCode : int
{
   exit_ok = 0,
   exit_config = 1,
   exit_input = 2,
   exit_solve = 3
};

/// Maps an exception escaping a command onto the documented exit codes.
inline int exit_code_for( const std::exception& e )
{
   if( dynamic_cast<const SolveFailure*>( &e ) || dynamic_cast<const NoFeasibleFound*>( &e ) ||
       dynamic_cast<const NumericalFailure*>( &e ) || dynamic_cast<const BackendFailure*>( &e ) )
      return exit_solve;
   if( dynamic_cast<const IoError*>( &e ) || dynamic_cast<const ParseError*>( &e ) ||
       dynamic_cast<const NonMonotonePercentiles*>( &e ) || dynamic_cast<const HorizonMismatch*>( &e ) ||
       dynamic_cast<const ValidationError*>( &e ) )
      return exit_input;
   return exit_config;
}

struct CommandResult
{
   std::vector<std::filesystem::path> written;
   nlohmann::json manifest;
};

namespace detail
{

inline std::string read_file( const std::filesystem::path& p )
{
   std::ifstream in( p, std::ios::binary );
   if( !in )
      throw IoError( fmt::format( "cannot read '{}'", p.string() ) );
   std::ostringstream s;
   s << in.rdbuf();
   return s.str();
}

inline std::string checksum( const std::filesystem::path& p )
{
   return fmt::format( "fnv1a64:{:016x}", sded::detail::fnv1a( read_file( p ) ) );
}

inline void require_file( const std::filesystem::path& p, const char* what )
{
   if( !std::filesystem::is_regular_file( p ) )
      throw IoError( fmt::format( "{} '{}' does not exist", what, p.string() ) );
}

inline void prepare_out( const std::filesystem::path& dir )
{
   std::error_code ec;
   std::filesystem::create_directories( dir, ec );
   if( ec || !std::filesystem::is_directory( dir ) )
      throw IoError( fmt::format( "cannot create output directory '{}'", dir.string() ) );
}

template <typename Fn>
std::filesystem::path write_text( const std::filesystem::path& p, Fn&& body )
{
   std::ofstream out( p, std::ios::binary );
   if( !out )
      throw IoError( fmt::format( "cannot write '{}'", p.string() ) );
   body( out );
   out.flush();
   if( !out )
      throw IoError( fmt::format( "failed while writing '{}'", p.string() ) );
   return p;
}

/// Everything the data-driven commands share.
struct Inputs
{
   GridCase grid;
   PercentileForecast load, wind;
};

inline Inputs load_inputs( const RunConfig& cfg, bool apply_variant )
{
   require_file( cfg.case_path, "case file" );
   require_file( cfg.load_forecast, "load forecast" );
   require_file( cfg.wind_forecast, "wind forecast" );
   Inputs in;
   in.grid = load_case( cfg.case_path );
   in.load = load_percentile_forecasts( cfg.load_forecast, SeriesKind::load );
   in.wind = load_percentile_forecasts( cfg.wind_forecast, SeriesKind::wind );
   if( apply_variant )
   {
      SweepSpec s = cfg.sweep_spec();
      s.configs = { { "variant", cfg.variant.convert } };
      in.grid = sweep_case( in.grid, s, 0, cfg.variant.bess_mw );
   }
   return in;
}

inline nlohmann::json base_manifest( const RunConfig& cfg, const char* command )
{
   nlohmann::json m;
   m["command"] = command;
   m["version"] = kVersion;
   m["seed"] = cfg.seed();
   m["scenarios"] = { { "k", cfg.scenarios.k },
                      { "coupling", to_string( cfg.scenarios.coupling ) },
                      { "noise_sigma", cfg.scenarios.disaggregation.noise_sigma },
                      { "load_level", cfg.scenarios.disaggregation.load_level },
                      { "wind_level", cfg.scenarios.disaggregation.wind_level },
                      { "renormalize", cfg.scenarios.disaggregation.renormalize } };
   m["solver"] = cfg.solver.to_string();
   m["rel_gap"] = cfg.mip.rel_gap;
   m["inputs"] = nlohmann::json::object();
   for( const auto& p : { cfg.case_path, cfg.load_forecast, cfg.wind_forecast } )
      if( std::filesystem::is_regular_file( p ) )
         m["inputs"][p.filename().string()] = checksum( p );
   return m;
}

/// Records output checksums and writes `<command>.manifest.json` last.
inline void finish( const RunConfig& cfg, CommandResult& r, const char* command )
{
   r.manifest["outputs"] = nlohmann::json::object();
   for( const auto& p : r.written )
      r.manifest["outputs"][p.filename().string()] = checksum( p );
   auto path = cfg.out_dir / fmt::format( "{}.manifest.json", command );
   write_text( path, [&]( std::ostream& o ) { o << r.manifest.dump( 2 ) << "\n"; } );
   r.written.push_back( path );
}

} // namespace detail

/// Writes scenarios.csv for the configured case variant.
inline CommandResult cmd_scenarios( const RunConfig& cfg )
{
   cfg.require_valid();
   auto in = detail::load_inputs( cfg, true );
   auto scen = generate_scenarios( in.load, in.wind, in.grid, cfg.scenarios );
   detail::prepare_out( cfg.out_dir );
   CommandResult r;
   r.manifest = detail::base_manifest( cfg, "scenarios" );
   r.manifest["horizon"] = scen.horizon();
   r.written.push_back( detail::write_text( cfg.out_dir / "scenarios.csv",
                                            [&]( std::ostream& o ) { write_scenarios_csv( scen, in.grid, o ); } ) );
   detail::finish( cfg, r, "scenarios" );
   return r;
}

/// Solves the configured case variant; writes solve_dispatch.csv and solution.json.
inline CommandResult cmd_solve( const RunConfig& cfg )
{
   cfg.require_valid();
   auto in = detail::load_inputs( cfg, true );
   auto scen = generate_scenarios( in.load, in.wind, in.grid, cfg.scenarios );
   auto rep = solve_dispatch( in.grid, scen, cfg.costs, cfg.solve_options(), cfg.model );
   auto check = verify_solution( rep.dispatch, in.grid, scen, cfg.costs, cfg.model );

   detail::prepare_out( cfg.out_dir );
   CommandResult r;
   r.manifest = detail::base_manifest( cfg, "solve" );
   r.manifest["status"] = milp::to_string( rep.raw.status );
   r.manifest["gap"] = rep.raw.gap;
   r.manifest["nodes"] = rep.raw.nodes;

   const auto& cb = rep.dispatch.cost;
   nlohmann::json sol;
   sol["status"] = milp::to_string( rep.raw.status );
   sol["objective"] = rep.raw.objective;
   sol["bound"] = rep.raw.bound;
   sol["gap"] = rep.raw.gap;
   sol["nodes"] = rep.raw.nodes;
   sol["fastpath_accepted"] = rep.fastpath_accepted;
   sol["cost"] = { { "generation", cb.generation },
                   { "battery", cb.battery },
                   { "curtailment", cb.curtailment },
                   { "expected_recourse", cb.expected_recourse },
                   { "total", cb.total } };
   sol["expected_wind_curtailment_mwh"] = rep.dispatch.expected_wind_curtailment_mwh( cfg.costs.dt_hours );
   sol["first_stage_wind_curtailment_mwh"] = rep.dispatch.first_stage_wind_curtailment_mwh( cfg.costs.dt_hours );
   sol["verification"] = { { "passed", check.passed() }, { "max_residual", check.max_residual() } };

   r.written.push_back( detail::write_text( cfg.out_dir / "solve_dispatch.csv", [&]( std::ostream& o ) {
      write_dispatch_csv( dispatch_table( rep.dispatch, scen ), o );
   } ) );
   r.written.push_back( detail::write_text( cfg.out_dir / "solution.json",
                                            [&]( std::ostream& o ) { o << sol.dump( 2 ) << "\n"; } ) );
   detail::finish( cfg, r, "solve" );
   return r;
}

/// Runs the configured sweep and writes the four report CSVs.
inline CommandResult cmd_sweep( const RunConfig& cfg )
{
   cfg.require_valid();
   if( cfg.sweep_configs.empty() || cfg.sweep_sizes_mw.empty() )
      throw ConfigError( "sweep needs sweep.configs and sweep.bess_sizes_mw" );
   auto in = detail::load_inputs( cfg, false );
   auto result = run_sweep( cfg.sweep_spec(), in.grid, in.load, in.wind );

   CommandResult r;
   r.manifest = detail::base_manifest( cfg, "sweep" );
   int failed = 0;
   double worst_gap = 0.0;
   for( const auto& c : result.cells )
   {
      if( !c.ok )
         ++failed;
      else
         worst_gap = std::max( worst_gap, c.gap );
   }
   r.manifest["cells"] = result.cells.size();
   r.manifest["failed_cells"] = failed;
   r.manifest["max_gap"] = worst_gap;
   r.written = emit_report( result, cfg.out_dir );
   detail::finish( cfg, r, "sweep" );
   return r;
}

/// Writes the extensive form of the configured case variant as model.mps.
inline CommandResult cmd_export_mps( const RunConfig& cfg )
{
   cfg.require_valid();
   auto in = detail::load_inputs( cfg, true );
   auto scen = generate_scenarios( in.load, in.wind, in.grid, cfg.scenarios );
   auto ef = build_extensive_form( in.grid, scen, cfg.costs, cfg.model );
   detail::prepare_out( cfg.out_dir );
   CommandResult r;
   r.manifest = detail::base_manifest( cfg, "export-mps" );
   r.manifest["variables"] = ef.model.num_variables();
   r.manifest["constraints"] = ef.model.num_constraints();
   r.manifest["binaries"] = ef.model.num_binaries();
   auto path = cfg.out_dir / "model.mps";
   milp::write_mps( ef.model, path );
   r.written.push_back( path );
   if( std::filesystem::exists( milp::mps_names_path( path ) ) )
      r.written.push_back( milp::mps_names_path( path ) );
   detail::finish( cfg, r, "export-mps" );
   return r;
}

/// Rebuilds the curve CSVs from an existing sweep.csv and prints a summary.
inline CommandResult cmd_report( const RunConfig& cfg, std::FILE* summary = stdout )
{
   auto src = cfg.out_dir / "sweep.csv";
   detail::require_file( src, "sweep result" );
   std::ifstream in( src );
   auto result = parse_sweep_csv( in, src.string() );
   compute_savings( result );

   CommandResult r;
   r.manifest = nlohmann::json{ { "command", "report" }, { "version", kVersion } };
   r.manifest["inputs"] = { { "sweep.csv", detail::checksum( src ) } };
   std::ostringstream curtail, save;
   write_curve_csvs( result, curtail, save );
   r.written.push_back( detail::write_text( cfg.out_dir / "curtailment_curve.csv",
                                            [&]( std::ostream& o ) { o << curtail.str(); } ) );
   r.written.push_back(
       detail::write_text( cfg.out_dir / "savings_curve.csv", [&]( std::ostream& o ) { o << save.str(); } ) );

   if( summary != nullptr )
   {
      fmt::print( summary, "{:<10} {:>8} {:>14} {:>12} {:>10}\n", "config", "bess_mw", "expected_cost",
                  "wc_mwh", "savings_%" );
      for( const auto& c : result.cells )
      {
         if( c.ok )
            fmt::print( summary, "{:<10} {:>8g} {:>14.2f} {:>12.3f} {:>10.2f}\n", c.config, c.bess_mw,
                        c.expected_cost, c.expected_wind_curtailment_mwh, c.savings_pct );
         else
            fmt::print( summary, "{:<10} {:>8g} {:>14}\n", c.config, c.bess_mw, "failed" );
      }
   }
   detail::finish( cfg, r, "report" );
   return r;
}

} // namespace sded::cli
