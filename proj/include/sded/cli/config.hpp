#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sded/error.hpp"
#include "sded/experiments.hpp"

namespace sded::cli
{

/// Environment variables consulted by apply_env_overrides, all prefixed SDED_.
inline constexpr const char* kEnvPrefix = "SDED_";

/// The case variant used by `scenarios`, `solve` and `export-mps`.
struct CaseVariant
{
   std::vector<std::string> convert; // generators turned into wind plants
   double bess_mw = 0.0;             // per unit, placed at every sweep bus
};

struct RunConfig
{
   std::filesystem::path case_path;
   std::filesystem::path load_forecast;
   std::filesystem::path wind_forecast;
   std::filesystem::path out_dir = "out";

   ScenarioOptions scenarios;
   CostParams costs;
   ModelOptions model;
   SolverChoice solver;
   milp::MipOptions mip;

   CaseVariant variant;
   std::vector<PenetrationConfig> sweep_configs;
   std::vector<double> sweep_sizes_mw;
   std::vector<BusId> bess_buses;
   double duration_hours = kDefaultDurationHours;
   int workers = 1;

   std::uint64_t seed() const { return scenarios.disaggregation.seed; }
   void set_seed( std::uint64_t s ) { scenarios.disaggregation.seed = s; }

   std::vector<std::string> validate() const
   {
      std::vector<std::string> errs;
      if( case_path.empty() )
         errs.emplace_back( "case path is not set" );
      if( load_forecast.empty() || wind_forecast.empty() )
         errs.emplace_back( "forecast paths are not set" );
      if( out_dir.empty() )
         errs.emplace_back( "output directory is not set" );
      if( scenarios.k < 1 )
         errs.push_back( fmt::format( "scenarios.k must be >= 1 (got {})", scenarios.k ) );
      if( !( scenarios.disaggregation.noise_sigma >= 0.0 ) )
         errs.push_back( fmt::format( "scenarios.noise_sigma must be >= 0 (got {})",
                                      scenarios.disaggregation.noise_sigma ) );
      if( !( scenarios.disaggregation.load_level > 0.0 ) || !( scenarios.disaggregation.wind_level >= 0.0 ) )
         errs.emplace_back( "scenarios.load_level must be > 0 and wind_level >= 0" );
      if( !( mip.rel_gap >= 0.0 ) )
         errs.push_back( fmt::format( "solver.rel_gap must be >= 0 (got {})", mip.rel_gap ) );
      if( !( variant.bess_mw >= 0.0 ) )
         errs.push_back( fmt::format( "variant.bess_mw must be >= 0 (got {})", variant.bess_mw ) );
      if( variant.bess_mw > 0.0 && bess_buses.empty() )
         errs.emplace_back( "variant.bess_mw is set but storage.buses is empty" );
      if( !( duration_hours > 0.0 ) )
         errs.push_back( fmt::format( "storage.duration_hours must be > 0 (got {})", duration_hours ) );
      if( workers < 1 )
         errs.push_back( fmt::format( "sweep.workers must be >= 1 (got {})", workers ) );
      for( double s : sweep_sizes_mw )
         if( !( s >= 0.0 ) )
            errs.push_back( fmt::format( "sweep.bess_sizes_mw entries must be >= 0 (got {})", s ) );
      for( auto& e : costs.validate() )
         errs.push_back( "costs: " + e );
      return errs;
   }

   void require_valid() const
   {
      auto errs = validate();
      if( errs.empty() )
         return;
      std::string msg = "invalid configuration:";
      for( const auto& e : errs )
         msg += "\n  - " + e;
      throw ConfigError( msg );
   }

   SweepSpec sweep_spec() const
   {
      SweepSpec s;
      s.configs = sweep_configs;
      s.bess_sizes_mw = sweep_sizes_mw;
      s.bess_buses = bess_buses;
      s.duration_hours = duration_hours;
      s.scenarios = scenarios;
      s.costs = costs;
      s.model = model;
      s.solve = solve_options();
      s.workers = workers;
      return s;
   }

   SolveOptions solve_options() const
   {
      SolveOptions o;
      o.solver = solver;
      o.mip = mip;
      return o;
   }
};

namespace detail
{

inline void reject_unknown( const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys )
{
   std::set<std::string> known( keys.begin(), keys.end() );
   for( auto it = j.begin(); it != j.end(); ++it )
      if( !known.count( it.key() ) )
         throw ConfigError( fmt::format( "{}: unknown key '{}'", where, it.key() ) );
}

template <typename T>
void read( const nlohmann::json& j, const char* key, T& out )
{
   if( auto it = j.find( key ); it != j.end() && !it->is_null() )
      out = it->get<T>();
}

inline std::filesystem::path resolve( const std::filesystem::path& base, const std::string& p )
{
   std::filesystem::path path( p );
   return ( path.is_absolute() ? path : base / path ).lexically_normal();
}

} // namespace detail

/// Builds a config from JSON; relative paths resolve against `base_dir`.
inline RunConfig config_from_json( const nlohmann::json& j, const std::filesystem::path& base_dir = "." )
{
   using detail::read;
   using detail::reject_unknown;
   RunConfig cfg;
   try
   {
      if( !j.is_object() )
         throw ConfigError( "config must be a JSON object" );
      reject_unknown( j, "config",
                      { "case", "forecasts", "output", "scenarios", "costs", "model", "solver", "variant", "storage",
                        "sweep" } );
      if( auto it = j.find( "case" ); it != j.end() )
         cfg.case_path = detail::resolve( base_dir, it->get<std::string>() );
      if( auto it = j.find( "output" ); it != j.end() )
         cfg.out_dir = detail::resolve( base_dir, it->get<std::string>() );
      if( auto it = j.find( "forecasts" ); it != j.end() )
      {
         reject_unknown( *it, "forecasts", { "load", "wind" } );
         if( it->contains( "load" ) )
            cfg.load_forecast = detail::resolve( base_dir, ( *it )["load"].get<std::string>() );
         if( it->contains( "wind" ) )
            cfg.wind_forecast = detail::resolve( base_dir, ( *it )["wind"].get<std::string>() );
      }
      if( auto it = j.find( "scenarios" ); it != j.end() )
      {
         reject_unknown( *it, "scenarios",
                         { "k", "coupling", "noise_sigma", "seed", "load_level", "wind_level", "renormalize" } );
         auto& d = cfg.scenarios.disaggregation;
         read( *it, "k", cfg.scenarios.k );
         if( it->contains( "coupling" ) )
         {
            try
            {
               cfg.scenarios.coupling = parse_coupling( ( *it )["coupling"].get<std::string>() );
            }
            catch( const std::invalid_argument& e )
            {
               throw ConfigError( e.what() );
            }
         }
         read( *it, "noise_sigma", d.noise_sigma );
         read( *it, "seed", d.seed );
         read( *it, "load_level", d.load_level );
         read( *it, "wind_level", d.wind_level );
         read( *it, "renormalize", d.renormalize );
      }
      if( auto it = j.find( "costs" ); it != j.end() )
      {
         reject_unknown( *it, "costs",
                         { "c_wind_curtail", "c_load_curtail", "c_gen_curtail", "c_charge", "c_discharge",
                           "regulation_multiplier", "dt_hours", "pwl_segments" } );
         auto& c = cfg.costs;
         read( *it, "c_wind_curtail", c.c_wind_curtail );
         read( *it, "c_load_curtail", c.c_load_curtail );
         read( *it, "c_gen_curtail", c.c_gen_curtail );
         read( *it, "c_charge", c.c_charge );
         read( *it, "c_discharge", c.c_discharge );
         read( *it, "regulation_multiplier", c.regulation_multiplier );
         read( *it, "dt_hours", c.dt_hours );
         read( *it, "pwl_segments", c.pwl_segments );
      }
      if( auto it = j.find( "model" ); it != j.end() )
      {
         reject_unknown( *it, "model", { "initial_dispatch", "terminal_soc" } );
         read( *it, "initial_dispatch", cfg.model.initial_dispatch );
         if( auto t = it->find( "terminal_soc" ); t != it->end() && !t->is_null() )
            cfg.model.terminal_soc = t->get<double>();
      }
      if( auto it = j.find( "solver" ); it != j.end() )
      {
         reject_unknown( *it, "solver", { "name", "rel_gap", "node_limit", "time_limit_s" } );
         if( it->contains( "name" ) )
            cfg.solver = SolverChoice::parse( ( *it )["name"].get<std::string>() );
         read( *it, "rel_gap", cfg.mip.rel_gap );
         read( *it, "node_limit", cfg.mip.node_limit );
         read( *it, "time_limit_s", cfg.mip.time_limit_s );
      }
      if( auto it = j.find( "variant" ); it != j.end() )
      {
         reject_unknown( *it, "variant", { "convert", "bess_mw" } );
         read( *it, "convert", cfg.variant.convert );
         read( *it, "bess_mw", cfg.variant.bess_mw );
      }
      if( auto it = j.find( "storage" ); it != j.end() )
      {
         reject_unknown( *it, "storage", { "buses", "duration_hours" } );
         read( *it, "buses", cfg.bess_buses );
         read( *it, "duration_hours", cfg.duration_hours );
      }
      if( auto it = j.find( "sweep" ); it != j.end() )
      {
         reject_unknown( *it, "sweep", { "configs", "bess_sizes_mw", "workers" } );
         if( auto c = it->find( "configs" ); c != it->end() )
            for( const auto& e : *c )
            {
               reject_unknown( e, "sweep.configs[]", { "label", "convert" } );
               PenetrationConfig p;
               p.label = e.at( "label" ).get<std::string>();
               read( e, "convert", p.converted );
               cfg.sweep_configs.push_back( p );
            }
         read( *it, "bess_sizes_mw", cfg.sweep_sizes_mw );
         read( *it, "workers", cfg.workers );
      }
   }
   catch( const nlohmann::json::exception& e )
   {
      throw ConfigError( fmt::format( "malformed config: {}", e.what() ) );
   }
   return cfg;
}

inline RunConfig load_config( const std::filesystem::path& path )
{
   std::ifstream in( path );
   if( !in )
      throw IoError( fmt::format( "cannot open config file '{}'", path.string() ) );
   nlohmann::json j;
   try
   {
      in >> j;
   }
   catch( const nlohmann::json::exception& e )
   {
      throw ConfigError( fmt::format( "{}: {}", path.string(), e.what() ) );
   }
   return config_from_json( j, path.parent_path() );
}

using EnvLookup = std::function<std::optional<std::string>( const std::string& )>;

inline std::optional<std::string> process_env( const std::string& name )
{
   const char* v = std::getenv( name.c_str() );
   if( v == nullptr || *v == '\0' )
      return std::nullopt;
   return std::string( v );
}

namespace detail
{

template <typename T>
T parse_env_number( const std::string& name, const std::string& v )
{
   try
   {
      std::size_t used = 0;
      T out;
      if constexpr( std::is_floating_point_v<T> )
         out = static_cast<T>( std::stod( v, &used ) );
      else
         out = static_cast<T>( std::stoll( v, &used ) );
      if( used != v.size() )
         throw std::invalid_argument( v );
      return out;
   }
   catch( const std::exception& )
   {
      throw ConfigError( fmt::format( "{}={} is not a valid number", name, v ) );
   }
}

} // namespace detail

/// Applies SDED_SEED, SDED_SOLVER, SDED_OUT, SDED_SCENARIOS, SDED_NOISE_SIGMA, SDED_WORKERS and SDED_REL_GAP.
inline void apply_env_overrides( RunConfig& cfg, const EnvLookup& env = process_env )
{
   auto get = [&]( const char* suffix ) -> std::optional<std::pair<std::string, std::string>> {
      std::string name = std::string( kEnvPrefix ) + suffix;
      if( auto v = env( name ) )
         return std::make_pair( name, *v );
      return std::nullopt;
   };
   if( auto v = get( "SEED" ) )
      cfg.set_seed( detail::parse_env_number<std::uint64_t>( v->first, v->second ) );
   if( auto v = get( "SOLVER" ) )
      cfg.solver = SolverChoice::parse( v->second );
   if( auto v = get( "OUT" ) )
      cfg.out_dir = v->second;
   if( auto v = get( "SCENARIOS" ) )
      cfg.scenarios.k = detail::parse_env_number<int>( v->first, v->second );
   if( auto v = get( "NOISE_SIGMA" ) )
      cfg.scenarios.disaggregation.noise_sigma = detail::parse_env_number<double>( v->first, v->second );
   if( auto v = get( "WORKERS" ) )
      cfg.workers = detail::parse_env_number<int>( v->first, v->second );
   if( auto v = get( "REL_GAP" ) )
      cfg.mip.rel_gap = detail::parse_env_number<double>( v->first, v->second );
}

} // namespace sded::cli
