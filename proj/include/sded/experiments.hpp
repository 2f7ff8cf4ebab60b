#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/formulation/solve.hpp"
#include "sded/grid.hpp"
#include "sded/scenarios.hpp"

namespace sded
{

struct PenetrationConfig
{
   std::string label;                     // e.g. "20%"
   std::vector<std::string> converted;    // generators replaced by wind plants

   bool operator==( const PenetrationConfig& ) const = default;
};

struct SweepSpec
{
   std::vector<PenetrationConfig> configs;
   std::vector<double> bess_sizes_mw;
   std::vector<BusId> bess_buses;
   double duration_hours = kDefaultDurationHours;
   ScenarioOptions scenarios; // the seed lives in scenarios.disaggregation.seed
   CostParams costs;
   ModelOptions model;
   SolveOptions solve;
   int workers = 1;
   /// Cell whose dispatch is kept for the dispatch table; defaults to the first nonzero size.
   std::optional<std::pair<std::size_t, double>> dispatch_cell;

   std::vector<std::string> validate() const
   {
      std::vector<std::string> errs;
      if( configs.empty() )
         errs.emplace_back( "sweep needs at least one penetration config" );
      if( bess_sizes_mw.empty() )
         errs.emplace_back( "sweep needs at least one BESS size" );
      for( double s : bess_sizes_mw )
         if( !( s >= 0.0 ) )
            errs.push_back( fmt::format( "BESS size must be >= 0 (got {})", s ) );
      if( !( duration_hours > 0.0 ) )
         errs.push_back( fmt::format( "duration_hours must be > 0 (got {})", duration_hours ) );
      if( workers < 1 )
         errs.push_back( fmt::format( "workers must be >= 1 (got {})", workers ) );
      if( scenarios.k < 1 )
         errs.push_back( fmt::format( "scenario count must be >= 1 (got {})", scenarios.k ) );
      for( auto& e : costs.validate() )
         errs.push_back( std::move( e ) );
      return errs;
   }
};

struct CellResult
{
   std::string config;
   double penetration = 0.0;
   double bess_mw = 0.0;
   bool ok = false;
   double expected_cost = 0.0; // model objective ($)
   double expected_wind_curtailment_mwh = 0.0;
   double first_stage_wind_curtailment_mwh = 0.0;
   double savings_abs = 0.0;
   double savings_pct = 0.0;
   double gap = 0.0;
   std::int64_t nodes = 0;
   double wall_seconds = 0.0; // not written to CSV
   std::string message;       // failure reason

   bool operator==( const CellResult& ) const = default;
};

/// One row per period, mirroring the dispatch summary table (MW).
struct DispatchRow
{
   int t = 0;
   double demand = 0.0;             // forecast system demand
   double conventional = 0.0;       // first-stage conventional dispatch
   double wind_available = 0.0;     // forecast wind
   double battery = 0.0;            // discharge - charge
   double wind_curtailment = 0.0;   // first stage
   double expected_wind_curtailment = 0.0; // probability-weighted second stage

   bool operator==( const DispatchRow& ) const = default;
};

struct SweepResult
{
   std::vector<CellResult> cells;
   std::optional<std::vector<DispatchRow>> dispatch;

   const CellResult* find( const std::string& config, double bess_mw ) const
   {
      for( const auto& c : cells )
         if( c.config == config && c.bess_mw == bess_mw )
            return &c;
      return nullptr;
   }
};

inline std::vector<DispatchRow> dispatch_table( const DispatchSolution& d, const ScenarioSet& scen )
{
   std::vector<DispatchRow> rows;
   for( int t = 0; t < d.horizon(); ++t )
   {
      DispatchRow r;
      r.t = t;
      r.demand = scen.forecast_load.row( t ).sum();
      r.conventional = d.gen.row( t ).sum() - d.first.gen_curtail.row( t ).sum();
      r.wind_available = scen.forecast_wind.row( t ).sum();
      r.battery = d.first.discharge.row( t ).sum() - d.first.charge.row( t ).sum();
      r.wind_curtailment = d.first.wind_curtail.row( t ).sum();
      for( std::size_t k = 0; k < d.scenarios.size(); ++k )
         r.expected_wind_curtailment += d.probs[k] * d.scenarios[k].wind_curtail.row( t ).sum();
      rows.push_back( r );
   }
   return rows;
}

struct Savings
{
   double abs = 0.0;
   double pct = 0.0;
};

inline Savings savings( double cost0, double cost )
{
   if( cost0 == 0.0 )
      return { cost0 - cost, 0.0 };
   return { cost0 - cost, ( cost0 - cost ) / cost0 * 100.0 };
}

/// Fills savings of every cell relative to the size-0 cell of its config.
inline void compute_savings( SweepResult& r )
{
   for( auto& cell : r.cells )
   {
      if( !cell.ok )
         continue;
      const CellResult* base = r.find( cell.config, 0.0 );
      if( base == nullptr || !base->ok )
         throw MissingBaseline( fmt::format( "config {} has no solved size-0 cell", cell.config ) );
      auto s = savings( base->expected_cost, cell.expected_cost );
      cell.savings_abs = s.abs;
      cell.savings_pct = s.pct;
   }
}

/// Case variant for one sweep cell.
inline GridCase sweep_case( const GridCase& base, const SweepSpec& spec, std::size_t config, double bess_mw )
{
   auto c = apply_wind_conversion( base, spec.configs[config].converted );
   if( bess_mw > 0.0 )
   {
      std::vector<StorageSpec> units;
      for( BusId b : spec.bess_buses )
      {
         StorageSpec s;
         s.id = fmt::format( "BESS{}", b );
         s.bus = b;
         s.rating_mw = bess_mw;
         s.energy_cap_mwh = spec.duration_hours * bess_mw;
         units.push_back( s );
      }
      c = attach_storage( c, units );
   }
   return c;
}

/// Solves every (config, size) cell; failed cells are recorded, not thrown.
///
/// Cells run on `spec.workers` threads and are stored in spec order, so the
/// result does not depend on the worker count.
inline SweepResult run_sweep( const SweepSpec& spec, const GridCase& base, const PercentileForecast& load_fc,
                              const PercentileForecast& wind_fc )
{
   auto errs = spec.validate();
   if( !errs.empty() )
      throw ValidationError( std::move( errs ) );

   struct Job
   {
      std::size_t config;
      double size;
   };
   std::vector<Job> jobs;
   for( std::size_t c = 0; c < spec.configs.size(); ++c )
      for( double s : spec.bess_sizes_mw )
         jobs.push_back( { c, s } );

   std::optional<std::size_t> keep;
   if( spec.dispatch_cell )
   {
      for( std::size_t j = 0; j < jobs.size(); ++j )
         if( jobs[j].config == spec.dispatch_cell->first && jobs[j].size == spec.dispatch_cell->second )
            keep = j;
   }
   else
   {
      for( std::size_t j = 0; j < jobs.size() && !keep; ++j )
         if( jobs[j].config == 0 && jobs[j].size > 0.0 )
            keep = j;
      if( !keep && !jobs.empty() )
         keep = 0;
   }

   SweepResult out;
   out.cells.resize( jobs.size() );
   std::optional<std::vector<DispatchRow>> kept;
   std::atomic<std::size_t> next{ 0 };

   auto work = [&] {
      for( std::size_t j = next++; j < jobs.size(); j = next++ )
      {
         auto& cell = out.cells[j];
         cell.config = spec.configs[jobs[j].config].label;
         cell.bess_mw = jobs[j].size;
         const auto t0 = std::chrono::steady_clock::now();
         try
         {
            auto c = sweep_case( base, spec, jobs[j].config, jobs[j].size );
            cell.penetration = penetration_level( c );
            auto scen = generate_scenarios( load_fc, wind_fc, c, spec.scenarios );
            auto rep = solve_dispatch( c, scen, spec.costs, spec.solve, spec.model );
            cell.ok = true;
            cell.expected_cost = rep.raw.objective;
            cell.expected_wind_curtailment_mwh = rep.dispatch.expected_wind_curtailment_mwh( spec.costs.dt_hours );
            cell.first_stage_wind_curtailment_mwh =
                rep.dispatch.first_stage_wind_curtailment_mwh( spec.costs.dt_hours );
            cell.gap = rep.raw.gap;
            cell.nodes = rep.raw.nodes;
            if( keep && *keep == j )
               kept = dispatch_table( rep.dispatch, scen );
         }
         catch( const std::exception& e )
         {
            cell.ok = false;
            cell.message = e.what();
         }
         cell.wall_seconds = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
      }
   };

   const int n = std::min<int>( spec.workers, static_cast<int>( jobs.size() ) );
   if( n <= 1 )
      work();
   else
   {
      std::vector<std::thread> pool;
      for( int w = 0; w < n; ++w )
         pool.emplace_back( work );
      for( auto& th : pool )
         th.join();
   }
   out.dispatch = std::move( kept );

   // Savings only where a baseline exists; a missing baseline leaves zeros.
   for( auto& cell : out.cells )
   {
      const CellResult* b = out.find( cell.config, 0.0 );
      if( cell.ok && b != nullptr && b->ok )
      {
         auto s = savings( b->expected_cost, cell.expected_cost );
         cell.savings_abs = s.abs;
         cell.savings_pct = s.pct;
      }
   }
   return out;
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail
{

inline std::string g6( double v )
{
   if( v == 0.0 )
      return "0"; // also folds -0
   return fmt::format( "{:.6g}", v );
}

inline std::string csv_field( const std::string& s )
{
   if( s.find_first_of( ",\"\n" ) == std::string::npos )
      return s;
   std::string q = "\"";
   for( char c : s )
   {
      if( c == '"' )
         q += '"';
      q += c == '\n' ? ' ' : c;
   }
   return q + "\"";
}

/// CSV split that honours double-quoted fields.
inline std::vector<std::string> split_quoted( const std::string& line )
{
   std::vector<std::string> out;
   std::string cur;
   bool quoted = false;
   for( std::size_t i = 0; i < line.size(); ++i )
   {
      char c = line[i];
      if( quoted )
      {
         if( c == '"' && i + 1 < line.size() && line[i + 1] == '"' )
         {
            cur += '"';
            ++i;
         }
         else if( c == '"' )
            quoted = false;
         else
            cur += c;
      }
      else if( c == '"' )
         quoted = true;
      else if( c == ',' )
      {
         out.push_back( cur );
         cur.clear();
      }
      else if( c != '\r' )
         cur += c;
   }
   out.push_back( cur );
   return out;
}

inline double round6( double v ) { return v == 0.0 ? 0.0 : std::stod( g6( v ) ); }

} // namespace detail

inline constexpr const char* kSweepHeader = "config,penetration,bess_mw,status,expected_cost,"
                                            "expected_wind_curtailment_mwh,first_stage_wind_curtailment_mwh,"
                                            "savings_abs,savings_pct,gap,nodes,message";
inline constexpr const char* kDispatchHeader = "period,demand_mw,cgd_mw,wg_mw,bd_mw,wc_mw,expected_wc_mw";
inline constexpr const char* kCurtailmentHeader =
    "config,penetration,bess_mw,expected_wind_curtailment_mwh,first_stage_wind_curtailment_mwh";
inline constexpr const char* kSavingsHeader = "config,penetration,bess_mw,expected_cost,savings_abs,savings_pct";

inline void write_sweep_csv( const SweepResult& r, std::ostream& out )
{
   using detail::g6;
   out << kSweepHeader << "\n";
   for( const auto& c : r.cells )
      out << fmt::format( "{},{},{},{},{},{},{},{},{},{},{},{}\n", detail::csv_field( c.config ), g6( c.penetration ),
                          g6( c.bess_mw ), c.ok ? "ok" : "failed", g6( c.expected_cost ),
                          g6( c.expected_wind_curtailment_mwh ), g6( c.first_stage_wind_curtailment_mwh ),
                          g6( c.savings_abs ), g6( c.savings_pct ), g6( c.gap ), c.nodes,
                          detail::csv_field( c.message ) );
}

inline void write_dispatch_csv( const std::vector<DispatchRow>& rows, std::ostream& out )
{
   using detail::g6;
   out << kDispatchHeader << "\n";
   for( const auto& r : rows )
      out << fmt::format( "T{},{},{},{},{},{},{}\n", r.t + 1, g6( r.demand ), g6( r.conventional ),
                          g6( r.wind_available ), g6( r.battery ), g6( r.wind_curtailment ),
                          g6( r.expected_wind_curtailment ) );
}

inline void write_curve_csvs( const SweepResult& r, std::ostream& curtail, std::ostream& save )
{
   using detail::g6;
   curtail << kCurtailmentHeader << "\n";
   save << kSavingsHeader << "\n";
   for( const auto& c : r.cells )
   {
      if( !c.ok )
         continue;
      auto cfg = detail::csv_field( c.config );
      curtail << fmt::format( "{},{},{},{},{}\n", cfg, g6( c.penetration ), g6( c.bess_mw ),
                              g6( c.expected_wind_curtailment_mwh ), g6( c.first_stage_wind_curtailment_mwh ) );
      save << fmt::format( "{},{},{},{},{},{}\n", cfg, g6( c.penetration ), g6( c.bess_mw ), g6( c.expected_cost ),
                           g6( c.savings_abs ), g6( c.savings_pct ) );
   }
}

/// Writes sweep.csv, dispatch.csv, curtailment_curve.csv and savings_curve.csv into `dir`.
inline std::vector<std::filesystem::path> emit_report( const SweepResult& r,
                                                       const std::optional<std::vector<DispatchRow>>& dispatch,
                                                       const std::filesystem::path& dir )
{
   std::error_code ec;
   std::filesystem::create_directories( dir, ec );
   if( ec )
      throw IoError( fmt::format( "cannot create output directory '{}': {}", dir.string(), ec.message() ) );
   auto open = [&]( const char* name ) {
      auto p = dir / name;
      std::ofstream f( p, std::ios::binary );
      if( !f )
         throw IoError( fmt::format( "cannot write '{}'", p.string() ) );
      return std::make_pair( p, std::move( f ) );
   };
   std::vector<std::filesystem::path> written;
   {
      auto [p, f] = open( "sweep.csv" );
      write_sweep_csv( r, f );
      written.push_back( p );
   }
   {
      auto [p, f] = open( "dispatch.csv" );
      write_dispatch_csv( dispatch.value_or( std::vector<DispatchRow>{} ), f );
      written.push_back( p );
   }
   {
      auto [pc, fc] = open( "curtailment_curve.csv" );
      auto [ps, fs] = open( "savings_curve.csv" );
      write_curve_csvs( r, fc, fs );
      written.push_back( pc );
      written.push_back( ps );
   }
   for( const auto& p : written )
      if( !std::filesystem::exists( p ) )
         throw IoError( fmt::format( "'{}' was not written", p.string() ) );
   return written;
}

inline std::vector<std::filesystem::path> emit_report( const SweepResult& r, const std::filesystem::path& dir )
{
   return emit_report( r, r.dispatch, dir );
}

/// Reads sweep.csv back; numeric fields come back at CSV precision and wall time is not stored.
inline SweepResult parse_sweep_csv( std::istream& in, const std::string& source = "<sweep.csv>" )
{
   std::string line;
   if( !std::getline( in, line ) || line != kSweepHeader )
      throw ParseError( fmt::format( "{}: missing or unexpected header", source ) );
   SweepResult r;
   int lineno = 1;
   while( std::getline( in, line ) )
   {
      ++lineno;
      if( line.empty() )
         continue;
      auto where = fmt::format( "{}:{}", source, lineno );
      auto f = detail::split_quoted( line );
      if( f.size() != 12 )
         throw ParseError( fmt::format( "{}: expected 12 fields, found {}", where, f.size() ) );
      CellResult c;
      c.config = f[0];
      c.penetration = detail::parse_double( f[1], where );
      c.bess_mw = detail::parse_double( f[2], where );
      if( f[3] != "ok" && f[3] != "failed" )
         throw ParseError( fmt::format( "{}: status must be ok or failed", where ) );
      c.ok = f[3] == "ok";
      c.expected_cost = detail::parse_double( f[4], where );
      c.expected_wind_curtailment_mwh = detail::parse_double( f[5], where );
      c.first_stage_wind_curtailment_mwh = detail::parse_double( f[6], where );
      c.savings_abs = detail::parse_double( f[7], where );
      c.savings_pct = detail::parse_double( f[8], where );
      c.gap = detail::parse_double( f[9], where );
      c.nodes = static_cast<std::int64_t>( detail::parse_double( f[10], where ) );
      c.message = f[11];
      r.cells.push_back( c );
   }
   return r;
}

inline std::vector<DispatchRow> parse_dispatch_csv( std::istream& in, const std::string& source = "<dispatch.csv>" )
{
   std::string line;
   if( !std::getline( in, line ) || line != kDispatchHeader )
      throw ParseError( fmt::format( "{}: missing or unexpected header", source ) );
   std::vector<DispatchRow> rows;
   int lineno = 1;
   while( std::getline( in, line ) )
   {
      ++lineno;
      if( line.empty() )
         continue;
      auto where = fmt::format( "{}:{}", source, lineno );
      auto f = detail::split_csv( line );
      if( f.size() != 7 || f[0].size() < 2 || f[0][0] != 'T' )
         throw ParseError( fmt::format( "{}: malformed dispatch row", where ) );
      DispatchRow r;
      r.t = static_cast<int>( detail::parse_double( f[0].substr( 1 ), where ) ) - 1;
      r.demand = detail::parse_double( f[1], where );
      r.conventional = detail::parse_double( f[2], where );
      r.wind_available = detail::parse_double( f[3], where );
      r.battery = detail::parse_double( f[4], where );
      r.wind_curtailment = detail::parse_double( f[5], where );
      r.expected_wind_curtailment = detail::parse_double( f[6], where );
      rows.push_back( r );
   }
   return rows;
}

/// The result as it reads back from CSV: numbers at 6 significant digits, no wall time.
inline SweepResult csv_rounded( SweepResult r )
{
   using detail::round6;
   for( auto& c : r.cells )
   {
      c.penetration = round6( c.penetration );
      c.bess_mw = round6( c.bess_mw );
      c.expected_cost = round6( c.expected_cost );
      c.expected_wind_curtailment_mwh = round6( c.expected_wind_curtailment_mwh );
      c.first_stage_wind_curtailment_mwh = round6( c.first_stage_wind_curtailment_mwh );
      c.savings_abs = round6( c.savings_abs );
      c.savings_pct = round6( c.savings_pct );
      c.gap = round6( c.gap );
      c.wall_seconds = 0.0;
      for( auto& ch : c.message )
         if( ch == '\n' )
            ch = ' ';
   }
   r.dispatch.reset();
   return r;
}

} // namespace sded
