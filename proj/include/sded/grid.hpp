#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "sded/error.hpp"

namespace sded
{

inline constexpr const char* kCaseSchema = "sded-case/1";

inline constexpr double kDefaultAngleBound = 0.6;
inline constexpr double kDefaultEfficiency = 0.95;
inline constexpr double kDefaultSocMin = 0.1;
inline constexpr double kDefaultSocMax = 0.9;
inline constexpr double kDefaultSocInit = 0.5;
inline constexpr double kDefaultDurationHours = 4.0;

using BusId = int;

struct Bus
{
   BusId id = 0;
   double demand_mw = 0.0;
   bool is_reference = false;

   bool operator==( const Bus& ) const = default;
};

struct Line
{
   BusId from_bus = 0;
   BusId to_bus = 0;
   double susceptance_pu = 0.0;
   double limit_mw = 0.0;
   double angle_min_rad = -kDefaultAngleBound;
   double angle_max_rad = kDefaultAngleBound;
   double phase_shift_rad = 0.0;

   bool operator==( const Line& ) const = default;
};

struct Generator
{
   std::string id;
   BusId bus = 0;
   double p_max_mw = 0.0;
   double p_min_mw = 0.0;
   double cost_a = 0.0; // $/MW^2h
   double cost_b = 0.0; // $/MWh
   double cost_c = 0.0; // $/h
   double ramp_mw_per_min = 0.0;
   bool provides_regulation = true;

   /// Quadratic hourly cost at output p.
   double hourly_cost( double p ) const { return cost_a * p * p + cost_b * p + cost_c; }

   bool operator==( const Generator& ) const = default;
};

struct WindPlant
{
   std::string id;
   BusId bus = 0;
   double capacity_mw = 0.0;
   std::optional<std::string> converted_from;

   bool operator==( const WindPlant& ) const = default;
};

struct StorageUnit
{
   std::string id;
   BusId bus = 0;
   double rating_mw = 0.0;      // charge and discharge limit
   double energy_cap_mwh = 0.0;
   double eta_ch = kDefaultEfficiency;
   double eta_dis = kDefaultEfficiency;
   double soc_min = kDefaultSocMin;
   double soc_max = kDefaultSocMax;
   double soc_init = kDefaultSocInit;

   bool operator==( const StorageUnit& ) const = default;
};

/// Storage to attach to a case; energy defaults to a 4 h duration.
struct StorageSpec
{
   std::string id;
   BusId bus = 0;
   double rating_mw = 0.0;
   std::optional<double> energy_cap_mwh;
   double eta_ch = kDefaultEfficiency;
   double eta_dis = kDefaultEfficiency;
   double soc_min = kDefaultSocMin;
   double soc_max = kDefaultSocMax;
   double soc_init = kDefaultSocInit;
};

struct GridCase
{
   std::string name;
   double base_mva = 100.0;
   std::vector<Bus> buses;
   std::vector<Line> lines;
   std::vector<Generator> generators;
   std::vector<WindPlant> wind_plants;
   std::vector<StorageUnit> storage_units;

   bool operator==( const GridCase& ) const = default;

   /// Position of a bus in `buses`, or -1.
   int bus_index( BusId id ) const
   {
      for( std::size_t i = 0; i < buses.size(); ++i )
         if( buses[i].id == id )
            return static_cast<int>( i );
      return -1;
   }

   int reference_index() const
   {
      for( std::size_t i = 0; i < buses.size(); ++i )
         if( buses[i].is_reference )
            return static_cast<int>( i );
      return -1;
   }

   double total_demand_mw() const
   {
      double s = 0.0;
      for( const auto& b : buses )
         s += b.demand_mw;
      return s;
   }

   double conventional_capacity_mw() const
   {
      double s = 0.0;
      for( const auto& g : generators )
         s += g.p_max_mw;
      return s;
   }

   double wind_capacity_mw() const
   {
      double s = 0.0;
      for( const auto& w : wind_plants )
         s += w.capacity_mw;
      return s;
   }

   double total_capacity_mw() const { return conventional_capacity_mw() + wind_capacity_mw(); }
};

namespace detail
{

/// Breadth-first search from the first bus over the line graph.
inline bool is_connected( const GridCase& c )
{
   if( c.buses.empty() )
      return true;
   std::unordered_map<BusId, std::size_t> pos;
   for( std::size_t i = 0; i < c.buses.size(); ++i )
      pos[c.buses[i].id] = i;
   std::vector<std::vector<std::size_t>> adj( c.buses.size() );
   for( const auto& l : c.lines )
   {
      auto a = pos.find( l.from_bus );
      auto b = pos.find( l.to_bus );
      if( a == pos.end() || b == pos.end() )
         continue;
      adj[a->second].push_back( b->second );
      adj[b->second].push_back( a->second );
   }
   std::vector<char> seen( c.buses.size(), 0 );
   std::queue<std::size_t> q;
   q.push( 0 );
   seen[0] = 1;
   std::size_t count = 1;
   while( !q.empty() )
   {
      auto u = q.front();
      q.pop();
      for( auto v : adj[u] )
         if( !seen[v] )
         {
            seen[v] = 1;
            ++count;
            q.push( v );
         }
   }
   return count == c.buses.size();
}

inline bool finite( double v ) { return std::isfinite( v ); }

} // namespace detail

/// Returns every invariant violation found in the case; empty means valid.
inline std::vector<std::string> validate_case( const GridCase& c )
{
   std::vector<std::string> errs;
   if( !( c.base_mva > 0.0 ) || !detail::finite( c.base_mva ) )
      errs.push_back( fmt::format( "base_mva must be positive, got {}", c.base_mva ) );
   if( c.buses.empty() )
      errs.emplace_back( "case has no buses" );

   std::set<BusId> ids;
   int refs = 0;
   for( const auto& b : c.buses )
   {
      if( !ids.insert( b.id ).second )
         errs.push_back( fmt::format( "duplicate bus id {}", b.id ) );
      if( !( b.demand_mw >= 0.0 ) || !detail::finite( b.demand_mw ) )
         errs.push_back( fmt::format( "bus {}: demand_mw must be >= 0, got {}", b.id, b.demand_mw ) );
      if( b.is_reference )
         ++refs;
   }
   if( !c.buses.empty() && refs != 1 )
      errs.push_back( fmt::format( "exactly one reference bus required, found {}", refs ) );

   auto known = [&]( BusId id ) { return ids.count( id ) > 0; };

   for( std::size_t k = 0; k < c.lines.size(); ++k )
   {
      const auto& l = c.lines[k];
      auto tag = fmt::format( "line {} ({}-{})", k, l.from_bus, l.to_bus );
      if( !known( l.from_bus ) )
         errs.push_back( fmt::format( "{}: unknown from_bus {}", tag, l.from_bus ) );
      if( !known( l.to_bus ) )
         errs.push_back( fmt::format( "{}: unknown to_bus {}", tag, l.to_bus ) );
      if( l.from_bus == l.to_bus )
         errs.push_back( fmt::format( "{}: from_bus equals to_bus", tag ) );
      if( !( l.limit_mw > 0.0 ) )
         errs.push_back( fmt::format( "{}: limit_mw must be positive, got {}", tag, l.limit_mw ) );
      if( !detail::finite( l.susceptance_pu ) || l.susceptance_pu == 0.0 )
         errs.push_back( fmt::format( "{}: susceptance_pu must be finite and nonzero", tag ) );
      if( !( l.angle_min_rad <= 0.0 && 0.0 <= l.angle_max_rad ) )
         errs.push_back( fmt::format( "{}: angle bounds must satisfy lo <= 0 <= hi, got ({}, {})", tag,
                                      l.angle_min_rad, l.angle_max_rad ) );
      if( !detail::finite( l.phase_shift_rad ) )
         errs.push_back( fmt::format( "{}: phase_shift_rad must be finite", tag ) );
   }

   std::set<std::string> gen_ids;
   for( const auto& g : c.generators )
   {
      if( !gen_ids.insert( g.id ).second )
         errs.push_back( fmt::format( "duplicate generator id {}", g.id ) );
      if( !known( g.bus ) )
         errs.push_back( fmt::format( "generator {}: unknown bus {}", g.id, g.bus ) );
      if( !( 0.0 <= g.p_min_mw && g.p_min_mw <= g.p_max_mw ) || !detail::finite( g.p_max_mw ) )
         errs.push_back( fmt::format( "generator {}: need 0 <= p_min <= p_max, got [{}, {}]", g.id, g.p_min_mw,
                                      g.p_max_mw ) );
      if( !( g.cost_a >= 0.0 ) )
         errs.push_back( fmt::format( "generator {}: cost_a must be >= 0, got {}", g.id, g.cost_a ) );
      if( !( g.ramp_mw_per_min > 0.0 ) )
         errs.push_back( fmt::format( "generator {}: ramp must be positive, got {}", g.id, g.ramp_mw_per_min ) );
   }

   std::set<std::string> wind_ids;
   for( const auto& w : c.wind_plants )
   {
      if( !wind_ids.insert( w.id ).second )
         errs.push_back( fmt::format( "duplicate wind plant id {}", w.id ) );
      if( !known( w.bus ) )
         errs.push_back( fmt::format( "wind plant {}: unknown bus {}", w.id, w.bus ) );
      if( !( w.capacity_mw > 0.0 ) || !detail::finite( w.capacity_mw ) )
         errs.push_back( fmt::format( "wind plant {}: capacity_mw must be positive", w.id ) );
   }

   std::set<std::string> storage_ids;
   for( const auto& s : c.storage_units )
   {
      if( !storage_ids.insert( s.id ).second )
         errs.push_back( fmt::format( "duplicate storage id {}", s.id ) );
      if( !known( s.bus ) )
         errs.push_back( fmt::format( "storage {}: unknown bus {}", s.id, s.bus ) );
      if( !( s.rating_mw > 0.0 ) )
         errs.push_back( fmt::format( "storage {}: rating_mw must be positive", s.id ) );
      if( !( s.energy_cap_mwh > 0.0 ) )
         errs.push_back( fmt::format( "storage {}: energy_cap_mwh must be positive", s.id ) );
      if( !( s.eta_ch > 0.0 && s.eta_ch <= 1.0 ) || !( s.eta_dis > 0.0 && s.eta_dis <= 1.0 ) )
         errs.push_back( fmt::format( "storage {}: efficiencies must lie in (0, 1]", s.id ) );
      if( !( 0.0 <= s.soc_min && s.soc_min <= s.soc_init && s.soc_init <= s.soc_max && s.soc_max <= 1.0 ) )
         errs.push_back( fmt::format( "storage {}: need 0 <= soc_min <= soc_init <= soc_max <= 1", s.id ) );
   }

   if( errs.empty() && !detail::is_connected( c ) )
      errs.emplace_back( "network is not connected (more than one island)" );
   return errs;
}

inline void require_valid( const GridCase& c )
{
   auto errs = validate_case( c );
   if( !errs.empty() )
      throw ValidationError( std::move( errs ) );
}

// ---------------------------------------------------------------------------
// JSON case files

inline nlohmann::json case_to_json( const GridCase& c )
{
   using nlohmann::json;
   json j;
   j["schema"] = kCaseSchema;
   j["name"] = c.name;
   j["base_mva"] = c.base_mva;
   j["buses"] = json::array();
   for( const auto& b : c.buses )
      j["buses"].push_back( { { "id", b.id }, { "demand_mw", b.demand_mw }, { "is_reference", b.is_reference } } );
   j["lines"] = json::array();
   for( const auto& l : c.lines )
      j["lines"].push_back( { { "from_bus", l.from_bus },
                              { "to_bus", l.to_bus },
                              { "susceptance_pu", l.susceptance_pu },
                              { "limit_mw", l.limit_mw },
                              { "angle_diff_bounds_rad", { l.angle_min_rad, l.angle_max_rad } },
                              { "phase_shift_rad", l.phase_shift_rad } } );
   j["generators"] = json::array();
   for( const auto& g : c.generators )
      j["generators"].push_back( { { "id", g.id },
                                   { "bus", g.bus },
                                   { "p_max_mw", g.p_max_mw },
                                   { "p_min_mw", g.p_min_mw },
                                   { "cost_a", g.cost_a },
                                   { "cost_b", g.cost_b },
                                   { "cost_c", g.cost_c },
                                   { "ramp_mw_per_min", g.ramp_mw_per_min },
                                   { "provides_regulation", g.provides_regulation } } );
   j["wind_plants"] = json::array();
   for( const auto& w : c.wind_plants )
   {
      json e = { { "id", w.id }, { "bus", w.bus }, { "capacity_mw", w.capacity_mw } };
      e["converted_from"] = w.converted_from ? json( *w.converted_from ) : json( nullptr );
      j["wind_plants"].push_back( e );
   }
   j["storage"] = json::array();
   for( const auto& s : c.storage_units )
      j["storage"].push_back( { { "id", s.id },
                                { "bus", s.bus },
                                { "rating_mw", s.rating_mw },
                                { "energy_cap_mwh", s.energy_cap_mwh },
                                { "eta_ch", s.eta_ch },
                                { "eta_dis", s.eta_dis },
                                { "soc_min", s.soc_min },
                                { "soc_max", s.soc_max },
                                { "soc_init", s.soc_init } } );
   return j;
}

namespace detail
{

template <typename T>
T get_or( const nlohmann::json& j, const char* key, T fallback )
{
   auto it = j.find( key );
   if( it == j.end() || it->is_null() )
      return fallback;
   return it->get<T>();
}

template <typename T>
T get_req( const nlohmann::json& j, const char* key, const std::string& where )
{
   auto it = j.find( key );
   if( it == j.end() || it->is_null() )
      throw ParseError( fmt::format( "{}: missing required field '{}'", where, key ) );
   return it->get<T>();
}

} // namespace detail

/// Parses a case; structural validation is separate (see load_case).
inline GridCase case_from_json( const nlohmann::json& j )
{
   using detail::get_or;
   using detail::get_req;
   try
   {
      if( !j.is_object() )
         throw ParseError( "case file must contain a JSON object" );
      auto schema = get_or<std::string>( j, "schema", kCaseSchema );
      if( schema != kCaseSchema )
         throw ParseError( fmt::format( "unsupported case schema '{}', expected '{}'", schema, kCaseSchema ) );

      GridCase c;
      c.name = get_or<std::string>( j, "name", "" );
      c.base_mva = get_req<double>( j, "base_mva", "case" );
      for( const auto& b : j.value( "buses", nlohmann::json::array() ) )
         c.buses.push_back( { get_req<int>( b, "id", "bus" ), get_or<double>( b, "demand_mw", 0.0 ),
                              get_or<bool>( b, "is_reference", false ) } );
      for( const auto& l : j.value( "lines", nlohmann::json::array() ) )
      {
         Line line;
         line.from_bus = get_req<int>( l, "from_bus", "line" );
         line.to_bus = get_req<int>( l, "to_bus", "line" );
         line.susceptance_pu = get_req<double>( l, "susceptance_pu", "line" );
         line.limit_mw = get_req<double>( l, "limit_mw", "line" );
         if( auto it = l.find( "angle_diff_bounds_rad" ); it != l.end() && !it->is_null() )
         {
            if( !it->is_array() || it->size() != 2 )
               throw ParseError( "line: angle_diff_bounds_rad must be a [lo, hi] pair" );
            line.angle_min_rad = ( *it )[0].get<double>();
            line.angle_max_rad = ( *it )[1].get<double>();
         }
         line.phase_shift_rad = get_or<double>( l, "phase_shift_rad", 0.0 );
         c.lines.push_back( line );
      }
      for( const auto& g : j.value( "generators", nlohmann::json::array() ) )
      {
         Generator gen;
         gen.id = get_req<std::string>( g, "id", "generator" );
         gen.bus = get_req<int>( g, "bus", "generator " + gen.id );
         gen.p_max_mw = get_req<double>( g, "p_max_mw", "generator " + gen.id );
         gen.p_min_mw = get_or<double>( g, "p_min_mw", 0.0 );
         gen.cost_a = get_or<double>( g, "cost_a", 0.0 );
         gen.cost_b = get_or<double>( g, "cost_b", 0.0 );
         gen.cost_c = get_or<double>( g, "cost_c", 0.0 );
         gen.ramp_mw_per_min = get_req<double>( g, "ramp_mw_per_min", "generator " + gen.id );
         gen.provides_regulation = get_or<bool>( g, "provides_regulation", true );
         c.generators.push_back( gen );
      }
      for( const auto& w : j.value( "wind_plants", nlohmann::json::array() ) )
      {
         WindPlant wp;
         wp.id = get_req<std::string>( w, "id", "wind plant" );
         wp.bus = get_req<int>( w, "bus", "wind plant " + wp.id );
         wp.capacity_mw = get_req<double>( w, "capacity_mw", "wind plant " + wp.id );
         if( auto it = w.find( "converted_from" ); it != w.end() && !it->is_null() )
            wp.converted_from = it->get<std::string>();
         c.wind_plants.push_back( wp );
      }
      for( const auto& s : j.value( "storage", nlohmann::json::array() ) )
      {
         StorageUnit u;
         u.id = get_req<std::string>( s, "id", "storage" );
         u.bus = get_req<int>( s, "bus", "storage " + u.id );
         u.rating_mw = get_req<double>( s, "rating_mw", "storage " + u.id );
         u.energy_cap_mwh = get_or<double>( s, "energy_cap_mwh", kDefaultDurationHours * u.rating_mw );
         u.eta_ch = get_or<double>( s, "eta_ch", kDefaultEfficiency );
         u.eta_dis = get_or<double>( s, "eta_dis", kDefaultEfficiency );
         u.soc_min = get_or<double>( s, "soc_min", kDefaultSocMin );
         u.soc_max = get_or<double>( s, "soc_max", kDefaultSocMax );
         u.soc_init = get_or<double>( s, "soc_init", kDefaultSocInit );
         c.storage_units.push_back( u );
      }
      return c;
   }
   catch( const nlohmann::json::exception& e )
   {
      throw ParseError( fmt::format( "malformed case: {}", e.what() ) );
   }
}

/// Reads, parses and validates a case file.
inline GridCase load_case( const std::filesystem::path& path )
{
   std::ifstream in( path );
   if( !in )
      throw IoError( fmt::format( "cannot open case file '{}'", path.string() ) );
   nlohmann::json j;
   try
   {
      in >> j;
   }
   catch( const nlohmann::json::exception& e )
   {
      throw ParseError( fmt::format( "{}: {}", path.string(), e.what() ) );
   }
   auto c = case_from_json( j );
   require_valid( c );
   return c;
}

inline void save_case( const GridCase& c, const std::filesystem::path& path )
{
   std::ofstream out( path );
   if( !out )
      throw IoError( fmt::format( "cannot write case file '{}'", path.string() ) );
   out << case_to_json( c ).dump( 2 ) << '\n';
}

// ---------------------------------------------------------------------------
// Case transformations

/// Replaces the named generators with wind plants of equal capacity.
inline GridCase apply_wind_conversion( const GridCase& c, const std::vector<std::string>& generator_ids )
{
   GridCase out = c;
   for( const auto& id : generator_ids )
   {
      auto it = std::find_if( out.generators.begin(), out.generators.end(),
                              [&]( const Generator& g ) { return g.id == id; } );
      if( it == out.generators.end() )
         throw UnknownGenerator( fmt::format( "no conventional generator with id '{}'", id ) );
      WindPlant w;
      w.id = "W" + it->id;
      w.bus = it->bus;
      w.capacity_mw = it->p_max_mw;
      w.converted_from = it->id;
      out.wind_plants.push_back( w );
      out.generators.erase( it );
   }
   return out;
}

inline GridCase attach_storage( const GridCase& c, const std::vector<StorageSpec>& specs )
{
   GridCase out = c;
   for( const auto& s : specs )
   {
      if( c.bus_index( s.bus ) < 0 )
         throw UnknownBus( fmt::format( "storage '{}' references unknown bus {}", s.id, s.bus ) );
      StorageUnit u;
      u.id = s.id.empty() ? fmt::format( "BESS{}", s.bus ) : s.id;
      u.bus = s.bus;
      u.rating_mw = s.rating_mw;
      u.energy_cap_mwh = s.energy_cap_mwh.value_or( kDefaultDurationHours * s.rating_mw );
      u.eta_ch = s.eta_ch;
      u.eta_dis = s.eta_dis;
      u.soc_min = s.soc_min;
      u.soc_max = s.soc_max;
      u.soc_init = s.soc_init;
      out.storage_units.push_back( u );
   }
   return out;
}

/// Installed wind capacity over total installed capacity.
inline double penetration_level( const GridCase& c )
{
   double total = c.total_capacity_mw();
   return total > 0.0 ? c.wind_capacity_mw() / total : 0.0;
}

/// Ramp limit in MW over one interval of `dt_hours`.
inline double ramp_limit_mw( const Generator& g, double dt_hours ) { return g.ramp_mw_per_min * dt_hours * 60.0; }

} // namespace sded
