#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/formulation/params.hpp"
#include "sded/formulation/var_index.hpp"
#include "sded/grid.hpp"
#include "sded/milp/model.hpp"
#include "sded/scenarios.hpp"

namespace sded
{

// ---------------------------------------------------------------------------
// Small physical helpers

/// DC line flow in per unit: B (delta_i - delta_j - shift).
inline double dc_flow_pu( double susceptance_pu, double delta_i, double delta_j, double shift = 0.0 )
{
   return susceptance_pu * ( delta_i - delta_j - shift );
}

/// SOC after one interval (fraction of energy capacity).
inline double soc_step( double soc, double charge_mw, double discharge_mw, double eta_ch, double eta_dis,
                        double dt_hours, double energy_cap_mwh )
{
   return soc + ( eta_ch * charge_mw - discharge_mw / eta_dis ) * dt_hours / energy_cap_mwh;
}

/// Secant lines of a quadratic cost on [p_min, p_max]; their maximum is the
/// interpolant through `segments + 1` equally spaced breakpoints.
struct CostSegment
{
   double slope;
   double intercept;
};

inline std::vector<CostSegment> pwl_segments( const Generator& g, int segments )
{
   std::vector<CostSegment> out;
   double lo = g.p_min_mw, hi = g.p_max_mw;
   int n = ( g.cost_a == 0.0 || hi <= lo ) ? 1 : segments;
   for( int k = 0; k < n; ++k )
   {
      double p0 = lo + ( hi - lo ) * k / n;
      double p1 = k + 1 == n ? hi : lo + ( hi - lo ) * ( k + 1 ) / n;
      double slope = g.cost_a * ( p0 + p1 ) + g.cost_b;
      out.push_back( { slope, g.hourly_cost( p0 ) - slope * p0 } );
   }
   return out;
}

inline double pwl_cost( const std::vector<CostSegment>& segs, double p )
{
   double v = -milp::kInf;
   for( const auto& s : segs )
      v = std::max( v, s.slope * p + s.intercept );
   return v;
}

// ---------------------------------------------------------------------------

struct ExtensiveForm
{
   milp::MilpModel model;
   VarIndex index;
};

namespace detail
{

/// Position of each entity's bus in `c.buses`.
template <typename T>
std::vector<int> bus_positions( const GridCase& c, const std::vector<T>& items )
{
   std::vector<int> out;
   for( const auto& it : items )
   {
      int b = c.bus_index( it.bus );
      if( b < 0 )
         throw UnknownBus( fmt::format( "{} refers to unknown bus {}", it.id, it.bus ) );
      out.push_back( b );
   }
   return out;
}

/// Hop distance from the reference bus, used to bound angle variables.
inline std::vector<int> hops_from_reference( const GridCase& c )
{
   const std::size_t n = c.buses.size();
   std::vector<std::vector<int>> adj( n );
   for( const auto& l : c.lines )
   {
      int a = c.bus_index( l.from_bus ), b = c.bus_index( l.to_bus );
      adj[static_cast<std::size_t>( a )].push_back( b );
      adj[static_cast<std::size_t>( b )].push_back( a );
   }
   std::vector<int> dist( n, -1 );
   int ref = std::max( 0, c.reference_index() );
   std::queue<int> q;
   dist[static_cast<std::size_t>( ref )] = 0;
   q.push( ref );
   while( !q.empty() )
   {
      int u = q.front();
      q.pop();
      for( int v : adj[static_cast<std::size_t>( u )] )
         if( dist[static_cast<std::size_t>( v )] < 0 )
         {
            dist[static_cast<std::size_t>( v )] = dist[static_cast<std::size_t>( u )] + 1;
            q.push( v );
         }
   }
   for( auto& d : dist )
      if( d < 0 )
         d = static_cast<int>( n );
   return dist;
}

inline std::vector<int> iota( std::size_t n )
{
   std::vector<int> v( n );
   for( std::size_t i = 0; i < n; ++i )
      v[i] = static_cast<int>( i );
   return v;
}

} // namespace detail

/// Checks that a scenario set fits a case; throws DimensionMismatch / EmptyHorizon.
inline void check_dimensions( const GridCase& c, const ScenarioSet& s )
{
   const auto T = s.forecast_load.rows();
   if( T == 0 )
      throw EmptyHorizon( "scenario set has an empty horizon" );
   auto nb = static_cast<Eigen::Index>( c.buses.size() );
   auto nw = static_cast<Eigen::Index>( c.wind_plants.size() );
   if( s.forecast_load.cols() != nb )
      throw DimensionMismatch(
          fmt::format( "forecast load has {} bus columns, case has {} buses", s.forecast_load.cols(), nb ) );
   if( s.forecast_wind.rows() != T || s.forecast_wind.cols() != nw )
      throw DimensionMismatch( fmt::format( "forecast wind is {}x{}, expected {}x{}", s.forecast_wind.rows(),
                                            s.forecast_wind.cols(), T, nw ) );
   if( s.load.size() != s.probs.size() || s.wind.size() != s.probs.size() )
      throw DimensionMismatch( fmt::format( "{} probabilities for {} load and {} wind scenarios", s.probs.size(),
                                            s.load.size(), s.wind.size() ) );
   for( std::size_t k = 0; k < s.probs.size(); ++k )
   {
      if( s.load[k].rows() != T || s.load[k].cols() != nb )
         throw DimensionMismatch( fmt::format( "scenario {} load is {}x{}, expected {}x{}", k, s.load[k].rows(),
                                               s.load[k].cols(), T, nb ) );
      if( s.wind[k].rows() != T || s.wind[k].cols() != nw )
         throw DimensionMismatch( fmt::format( "scenario {} wind is {}x{}, expected {}x{}", k, s.wind[k].rows(),
                                               s.wind[k].cols(), T, nw ) );
   }
}

/// Builds the two-stage extensive form as one MILP.
inline ExtensiveForm build_extensive_form( const GridCase& c, const ScenarioSet& scen, const CostParams& costs,
                                           const ModelOptions& opt = {} )
{
   using milp::kInf;
   using milp::Sense;
   require_valid( c );
   costs.require_valid();
   check_dimensions( c, scen );

   const int T = static_cast<int>( scen.forecast_load.rows() );
   const int K = static_cast<int>( scen.size() );
   const int N = static_cast<int>( c.buses.size() );
   const int L = static_cast<int>( c.lines.size() );
   const int G = static_cast<int>( c.generators.size() );
   const int W = static_cast<int>( c.wind_plants.size() );
   const int B = static_cast<int>( c.storage_units.size() );
   const double dt = costs.dt_hours;
   const double base = c.base_mva;
   const auto sz = []( int i ) { return static_cast<std::size_t>( i ); };

   const auto gen_bus = detail::bus_positions( c, c.generators );
   const auto wind_bus = detail::bus_positions( c, c.wind_plants );
   const auto stor_bus = detail::bus_positions( c, c.storage_units );
   std::vector<int> from( sz( L ) ), to( sz( L ) );
   for( int l = 0; l < L; ++l )
   {
      from[sz( l )] = c.bus_index( c.lines[sz( l )].from_bus );
      to[sz( l )] = c.bus_index( c.lines[sz( l )].to_bus );
   }
   const int ref = c.reference_index();
   const auto hops = detail::hops_from_reference( c );
   double max_angle = 0.0;
   for( const auto& l : c.lines )
      max_angle = std::max( { max_angle, std::abs( l.angle_min_rad ), std::abs( l.angle_max_rad ) } );

   std::vector<int> regulating, non_regulating;
   for( int g = 0; g < G; ++g )
      ( c.generators[sz( g )].provides_regulation ? regulating : non_regulating ).push_back( g );
   for( const auto& [id, mw] : opt.initial_dispatch )
      if( std::none_of( c.generators.begin(), c.generators.end(), [&]( const Generator& g ) { return g.id == id; } ) )
         throw UnknownGenerator( fmt::format( "initial dispatch names unknown generator '{}'", id ) );

   ExtensiveForm ef;
   auto& m = ef.model;
   m.name() = c.name.empty() ? "sded" : c.name;
   ef.index = VarIndex( T, K );
   auto& ix = ef.index;

   auto bus_name = [&]( int i ) { return fmt::format( "b{}", c.buses[sz( i )].id ); };
   auto line_name = [&]( int l ) { return fmt::format( "L{}", l ); };
   auto stage_suffix = []( int t, int s ) {
      return s < 0 ? fmt::format( "t{}", t ) : fmt::format( "t{}.s{}", t, s );
   };

   // ---- columns -----------------------------------------------------------
   // Each block is laid out entity-major, then t, then scenario, matching VarIndex.
   auto add_block = [&]( VarKind kind, const std::vector<int>& ents, int num_ents, auto&& name_of, auto&& bounds_of,
                         bool binary = false ) {
      ix.add_block( kind, ents, num_ents );
      const int S = is_second_stage( kind ) ? K : 1;
      for( int e : ents )
         for( int t = 0; t < T; ++t )
            for( int s = 0; s < S; ++s )
            {
               int sc = is_second_stage( kind ) ? s : -1;
               auto [lo, hi] = bounds_of( e, t, sc );
               auto name = fmt::format( "{}.{}.{}", to_string( kind ), name_of( e ), stage_suffix( t, sc ) );
               m.add_variable( std::move( name ), lo, hi, 0.0, binary );
            }
   };
   auto gen_name = [&]( int g ) { return c.generators[sz( g )].id; };
   auto wind_name = [&]( int w ) { return c.wind_plants[sz( w )].id; };
   auto stor_name = [&]( int b ) { return c.storage_units[sz( b )].id; };
   auto all_g = detail::iota( sz( G ) ), all_w = detail::iota( sz( W ) ), all_n = detail::iota( sz( N ) ),
        all_l = detail::iota( sz( L ) ), all_b = detail::iota( sz( B ) );
   using Bounds = std::pair<double, double>;

   auto wind_avail = [&]( int w, int t, int s ) {
      return s < 0 ? scen.forecast_wind( t, w ) : scen.wind[sz( s )]( t, w );
   };
   auto demand = [&]( int i, int t, int s ) {
      return s < 0 ? scen.forecast_load( t, i ) : scen.load[sz( s )]( t, i );
   };
   auto angle_bounds = [&]( int i, int, int ) -> Bounds {
      if( i == ref )
         return { 0.0, 0.0 };
      double r = max_angle * hops[sz( i )];
      return { -r, r };
   };
   auto flow_bounds = [&]( int l, int, int ) -> Bounds {
      const auto& ln = c.lines[sz( l )];
      double lo = -ln.limit_mw, hi = ln.limit_mw;
      // The angle-difference limit maps onto the flow through the flow definition.
      double k = base * ln.susceptance_pu;
      if( k != 0.0 )
      {
         double a = k * ( ln.angle_min_rad - ln.phase_shift_rad );
         double b = k * ( ln.angle_max_rad - ln.phase_shift_rad );
         lo = std::max( lo, std::min( a, b ) );
         hi = std::min( hi, std::max( a, b ) );
      }
      return { lo, hi };
   };
   auto soc_bounds = [&]( int b, int t ) -> Bounds {
      const auto& u = c.storage_units[sz( b )];
      double lo = u.soc_min;
      if( opt.terminal_soc && t == T - 1 )
         lo = std::max( lo, *opt.terminal_soc );
      return { lo, u.soc_max };
   };
   auto rating = [&]( int b ) { return c.storage_units[sz( b )].rating_mw; };

   // stage 1
   add_block( VarKind::gen, all_g, G, gen_name, [&]( int g, int, int ) -> Bounds {
      return { c.generators[sz( g )].p_min_mw, c.generators[sz( g )].p_max_mw };
   } );
   add_block( VarKind::gen_cost, all_g, G, gen_name, [&]( int g, int, int ) -> Bounds {
      const auto& gen = c.generators[sz( g )];
      double lo = std::min( gen.hourly_cost( gen.p_min_mw ), gen.hourly_cost( gen.p_max_mw ) );
      if( gen.cost_a > 0.0 )
      {
         double v = -gen.cost_b / ( 2.0 * gen.cost_a );
         if( v > gen.p_min_mw && v < gen.p_max_mw )
            lo = gen.hourly_cost( v );
      }
      return { lo, kInf };
   } );
   add_block( VarKind::gen_curtail, all_g, G, gen_name,
              [&]( int g, int, int ) -> Bounds { return { 0.0, c.generators[sz( g )].p_max_mw }; } );
   add_block( VarKind::wind_curtail, all_w, W, wind_name,
              [&]( int w, int t, int s ) -> Bounds { return { 0.0, std::max( 0.0, wind_avail( w, t, s ) ) }; } );
   add_block( VarKind::load_curtail, all_n, N, bus_name,
              [&]( int i, int t, int s ) -> Bounds { return { 0.0, std::max( 0.0, demand( i, t, s ) ) }; } );
   add_block( VarKind::charge, all_b, B, stor_name, [&]( int b, int, int ) -> Bounds { return { 0.0, rating( b ) }; } );
   add_block( VarKind::discharge, all_b, B, stor_name,
              [&]( int b, int, int ) -> Bounds { return { 0.0, rating( b ) }; } );
   add_block( VarKind::gamma_ch, all_b, B, stor_name, []( int, int, int ) -> Bounds { return { 0.0, 1.0 }; },
              !opt.relax_indicators );
   add_block( VarKind::gamma_dis, all_b, B, stor_name, []( int, int, int ) -> Bounds { return { 0.0, 1.0 }; },
              !opt.relax_indicators );
   add_block( VarKind::soc, all_b, B, stor_name, [&]( int b, int t, int ) { return soc_bounds( b, t ); } );
   add_block( VarKind::angle, all_n, N, bus_name, angle_bounds );
   add_block( VarKind::flow, all_l, L, line_name, flow_bounds );

   // stage 2
   add_block( VarKind::reg_up, regulating, G, gen_name, [&]( int g, int, int ) -> Bounds {
      return { 0.0, c.generators[sz( g )].p_max_mw - c.generators[sz( g )].p_min_mw };
   } );
   add_block( VarKind::reg_down, regulating, G, gen_name, [&]( int g, int, int ) -> Bounds {
      return { 0.0, c.generators[sz( g )].p_max_mw - c.generators[sz( g )].p_min_mw };
   } );
   add_block( VarKind::gen_curtail_s, non_regulating, G, gen_name,
              [&]( int g, int, int ) -> Bounds { return { 0.0, c.generators[sz( g )].p_max_mw }; } );
   add_block( VarKind::wind_curtail_s, all_w, W, wind_name,
              [&]( int w, int t, int s ) -> Bounds { return { 0.0, std::max( 0.0, wind_avail( w, t, s ) ) }; } );
   add_block( VarKind::load_curtail_s, all_n, N, bus_name,
              [&]( int i, int t, int s ) -> Bounds { return { 0.0, std::max( 0.0, demand( i, t, s ) ) }; } );
   add_block( VarKind::charge_s, all_b, B, stor_name,
              [&]( int b, int, int ) -> Bounds { return { 0.0, rating( b ) }; } );
   add_block( VarKind::discharge_s, all_b, B, stor_name,
              [&]( int b, int, int ) -> Bounds { return { 0.0, rating( b ) }; } );
   add_block( VarKind::gamma_ch_s, all_b, B, stor_name, []( int, int, int ) -> Bounds { return { 0.0, 1.0 }; },
              !opt.relax_indicators );
   add_block( VarKind::gamma_dis_s, all_b, B, stor_name, []( int, int, int ) -> Bounds { return { 0.0, 1.0 }; },
              !opt.relax_indicators );
   add_block( VarKind::soc_s, all_b, B, stor_name, [&]( int b, int t, int ) { return soc_bounds( b, t ); } );
   add_block( VarKind::angle_s, all_n, N, bus_name, angle_bounds );
   add_block( VarKind::flow_s, all_l, L, line_name, flow_bounds );

   // ---- objective ---------------------------------------------------------
   auto add_obj = [&]( int col, double coef ) { m.variable( col ).objective += coef; };
   for( int t = 0; t < T; ++t )
   {
      for( int g = 0; g < G; ++g )
      {
         add_obj( ix.col( VarKind::gen_cost, g, t ), dt );
         add_obj( ix.col( VarKind::gen_curtail, g, t ), dt * costs.c_gen_curtail );
      }
      for( int i = 0; i < N; ++i )
         add_obj( ix.col( VarKind::load_curtail, i, t ), dt * costs.c_load_curtail );
      for( int b = 0; b < B; ++b )
      {
         add_obj( ix.col( VarKind::charge, b, t ), dt * costs.c_charge );
         add_obj( ix.col( VarKind::discharge, b, t ), dt * costs.c_discharge );
      }
      for( int w = 0; w < W; ++w )
         add_obj( ix.col( VarKind::wind_curtail, w, t ), dt * costs.c_wind_curtail );
      for( int s = 0; s < K; ++s )
      {
         const double pw = scen.probs[sz( s )] * dt;
         for( int g : regulating )
         {
            double r = costs.regulation_multiplier * c.generators[sz( g )].cost_b;
            add_obj( ix.col( VarKind::reg_up, g, t, s ), pw * r );
            add_obj( ix.col( VarKind::reg_down, g, t, s ), pw * r );
         }
         for( int g : non_regulating )
            add_obj( ix.col( VarKind::gen_curtail_s, g, t, s ), pw * costs.c_gen_curtail );
         for( int w = 0; w < W; ++w )
            add_obj( ix.col( VarKind::wind_curtail_s, w, t, s ), pw * costs.c_wind_curtail );
         for( int b = 0; b < B; ++b )
         {
            add_obj( ix.col( VarKind::charge_s, b, t, s ), pw * costs.c_charge );
            add_obj( ix.col( VarKind::discharge_s, b, t, s ), pw * costs.c_discharge );
         }
         for( int i = 0; i < N; ++i )
            add_obj( ix.col( VarKind::load_curtail_s, i, t, s ), pw * costs.c_load_curtail );
      }
   }

   // ---- constraints -------------------------------------------------------
   std::vector<int> idx;
   std::vector<double> val;
   auto row = [&]( std::string name, Sense sense, double rhs ) {
      m.add_constraint( std::move( name ), idx, val, sense, rhs );
      idx.clear();
      val.clear();
   };
   auto term = [&]( int col, double coef ) {
      idx.push_back( col );
      val.push_back( coef );
   };

   // Stage selector: s = -1 addresses first-stage kinds.
   struct Kinds
   {
      VarKind wind_curtail, load_curtail, charge, discharge, gamma_ch, gamma_dis, soc, angle, flow;
   };
   const Kinds k1{ VarKind::wind_curtail, VarKind::load_curtail, VarKind::charge, VarKind::discharge,
                   VarKind::gamma_ch,     VarKind::gamma_dis,    VarKind::soc,    VarKind::angle,
                   VarKind::flow };
   const Kinds k2{ VarKind::wind_curtail_s, VarKind::load_curtail_s, VarKind::charge_s, VarKind::discharge_s,
                   VarKind::gamma_ch_s,     VarKind::gamma_dis_s,    VarKind::soc_s,    VarKind::angle_s,
                   VarKind::flow_s };

   // Network and storage rows shared by both stages.
   auto network_and_storage = [&]( int t, int s ) {
      const Kinds& k = s < 0 ? k1 : k2;
      const auto sfx = stage_suffix( t, s );
      const char* st = s < 0 ? "s1" : "s2";
      for( int l = 0; l < L; ++l )
      {
         const auto& ln = c.lines[sz( l )];
         double kk = base * ln.susceptance_pu;
         term( ix.col( k.flow, l, t, s ), 1.0 );
         term( ix.col( k.angle, from[sz( l )], t, s ), -kk );
         term( ix.col( k.angle, to[sz( l )], t, s ), kk );
         row( fmt::format( "{}.flow_def.{}.{}", st, line_name( l ), sfx ), Sense::eq, -kk * ln.phase_shift_rad );
         if( kk == 0.0 )
         {
            term( ix.col( k.angle, from[sz( l )], t, s ), 1.0 );
            term( ix.col( k.angle, to[sz( l )], t, s ), -1.0 );
            row( fmt::format( "{}.angle_lo.{}.{}", st, line_name( l ), sfx ), Sense::ge, ln.angle_min_rad );
            term( ix.col( k.angle, from[sz( l )], t, s ), 1.0 );
            term( ix.col( k.angle, to[sz( l )], t, s ), -1.0 );
            row( fmt::format( "{}.angle_hi.{}.{}", st, line_name( l ), sfx ), Sense::le, ln.angle_max_rad );
         }
      }
      for( int b = 0; b < B; ++b )
      {
         const auto& u = c.storage_units[sz( b )];
         const auto bn = stor_name( b );
         term( ix.col( k.charge, b, t, s ), 1.0 );
         term( ix.col( k.gamma_ch, b, t, s ), -u.rating_mw );
         row( fmt::format( "{}.ch_lim.{}.{}", st, bn, sfx ), Sense::le, 0.0 );
         term( ix.col( k.discharge, b, t, s ), 1.0 );
         term( ix.col( k.gamma_dis, b, t, s ), -u.rating_mw );
         row( fmt::format( "{}.dis_lim.{}.{}", st, bn, sfx ), Sense::le, 0.0 );
         term( ix.col( k.gamma_ch, b, t, s ), 1.0 );
         term( ix.col( k.gamma_dis, b, t, s ), 1.0 );
         row( fmt::format( "{}.compl.{}.{}", st, bn, sfx ), Sense::le, 1.0 );
         // SOC_t - SOC_{t-1} - (eta_ch ch - dis / eta_dis) dt / E = 0
         double f = dt / u.energy_cap_mwh;
         term( ix.col( k.soc, b, t, s ), 1.0 );
         term( ix.col( k.charge, b, t, s ), -u.eta_ch * f );
         term( ix.col( k.discharge, b, t, s ), f / u.eta_dis );
         double rhs = 0.0;
         if( t > 0 )
            term( ix.col( k.soc, b, t - 1, s ), -1.0 );
         else
            rhs = u.soc_init;
         row( fmt::format( "{}.soc.{}.{}", st, bn, sfx ), Sense::eq, rhs );
      }
   };

   // Incidence helpers for bus balances.
   std::vector<std::vector<int>> gens_at( sz( N ) ), winds_at( sz( N ) ), stor_at( sz( N ) ), out_at( sz( N ) ),
       in_at( sz( N ) );
   for( int g = 0; g < G; ++g )
      gens_at[sz( gen_bus[sz( g )] )].push_back( g );
   for( int w = 0; w < W; ++w )
      winds_at[sz( wind_bus[sz( w )] )].push_back( w );
   for( int b = 0; b < B; ++b )
      stor_at[sz( stor_bus[sz( b )] )].push_back( b );
   for( int l = 0; l < L; ++l )
   {
      out_at[sz( from[sz( l )] )].push_back( l );
      in_at[sz( to[sz( l )] )].push_back( l );
   }

   auto ramp_limit = [&]( int g ) { return ramp_limit_mw( c.generators[sz( g )], dt ); };

   // First stage
   for( int t = 0; t < T; ++t )
   {
      const auto sfx = stage_suffix( t, -1 );
      for( int i = 0; i < N; ++i )
      {
         double rhs = demand( i, t, -1 );
         for( int g : gens_at[sz( i )] )
         {
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            term( ix.col( VarKind::gen_curtail, g, t ), -1.0 );
         }
         for( int w : winds_at[sz( i )] )
         {
            term( ix.col( VarKind::wind_curtail, w, t ), -1.0 );
            rhs -= wind_avail( w, t, -1 );
         }
         for( int b : stor_at[sz( i )] )
         {
            term( ix.col( VarKind::discharge, b, t ), 1.0 );
            term( ix.col( VarKind::charge, b, t ), -1.0 );
         }
         for( int l : in_at[sz( i )] )
            term( ix.col( VarKind::flow, l, t ), 1.0 );
         for( int l : out_at[sz( i )] )
            term( ix.col( VarKind::flow, l, t ), -1.0 );
         term( ix.col( VarKind::load_curtail, i, t ), 1.0 );
         row( fmt::format( "s1.bal.{}.{}", bus_name( i ), sfx ), Sense::eq, rhs );
      }
      for( int g = 0; g < G; ++g )
      {
         const auto& gen = c.generators[sz( g )];
         for( std::size_t k = 0; const auto& seg : pwl_segments( gen, costs.pwl_segments ) )
         {
            term( ix.col( VarKind::gen_cost, g, t ), 1.0 );
            term( ix.col( VarKind::gen, g, t ), -seg.slope );
            row( fmt::format( "s1.cost{}.{}.{}", k++, gen.id, sfx ), Sense::ge, seg.intercept );
         }
         term( ix.col( VarKind::gen_curtail, g, t ), 1.0 );
         term( ix.col( VarKind::gen, g, t ), -1.0 );
         row( fmt::format( "s1.gcurt.{}.{}", gen.id, sfx ), Sense::le, 0.0 );

         double R = ramp_limit( g );
         if( t > 0 )
         {
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            term( ix.col( VarKind::gen, g, t - 1 ), -1.0 );
            row( fmt::format( "s1.ramp_up.{}.{}", gen.id, sfx ), Sense::le, R );
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            term( ix.col( VarKind::gen, g, t - 1 ), -1.0 );
            row( fmt::format( "s1.ramp_dn.{}.{}", gen.id, sfx ), Sense::ge, -R );
         }
         else if( auto it = opt.initial_dispatch.find( gen.id ); it != opt.initial_dispatch.end() )
         {
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            row( fmt::format( "s1.ramp_up.{}.{}", gen.id, sfx ), Sense::le, it->second + R );
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            row( fmt::format( "s1.ramp_dn.{}.{}", gen.id, sfx ), Sense::ge, it->second - R );
         }
      }
      network_and_storage( t, -1 );
   }

   // Second stage
   for( int s = 0; s < K; ++s )
      for( int t = 0; t < T; ++t )
      {
         const auto sfx = stage_suffix( t, s );
         for( int i = 0; i < N; ++i )
         {
            double rhs = demand( i, t, s );
            for( int g : gens_at[sz( i )] )
            {
               term( ix.col( VarKind::gen, g, t ), 1.0 );
               if( c.generators[sz( g )].provides_regulation )
               {
                  term( ix.col( VarKind::reg_up, g, t, s ), 1.0 );
                  term( ix.col( VarKind::reg_down, g, t, s ), -1.0 );
               }
               else
                  term( ix.col( VarKind::gen_curtail_s, g, t, s ), -1.0 );
            }
            for( int w : winds_at[sz( i )] )
            {
               term( ix.col( VarKind::wind_curtail_s, w, t, s ), -1.0 );
               rhs -= wind_avail( w, t, s );
            }
            for( int b : stor_at[sz( i )] )
            {
               term( ix.col( VarKind::discharge_s, b, t, s ), 1.0 );
               term( ix.col( VarKind::charge_s, b, t, s ), -1.0 );
            }
            for( int l : in_at[sz( i )] )
               term( ix.col( VarKind::flow_s, l, t, s ), 1.0 );
            for( int l : out_at[sz( i )] )
               term( ix.col( VarKind::flow_s, l, t, s ), -1.0 );
            term( ix.col( VarKind::load_curtail_s, i, t, s ), 1.0 );
            row( fmt::format( "s2.bal.{}.{}", bus_name( i ), sfx ), Sense::eq, rhs );
         }
         for( int g : regulating )
         {
            const auto& gen = c.generators[sz( g )];
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            term( ix.col( VarKind::reg_up, g, t, s ), 1.0 );
            row( fmt::format( "s2.reg_up.{}.{}", gen.id, sfx ), Sense::le, gen.p_max_mw );
            term( ix.col( VarKind::gen, g, t ), 1.0 );
            term( ix.col( VarKind::reg_down, g, t, s ), -1.0 );
            row( fmt::format( "s2.reg_dn.{}.{}", gen.id, sfx ), Sense::ge, gen.p_min_mw );
            double R = ramp_limit( g );
            auto out_terms = [&]( int tt, double sign ) {
               term( ix.col( VarKind::gen, g, tt ), sign );
               term( ix.col( VarKind::reg_up, g, tt, s ), sign );
               term( ix.col( VarKind::reg_down, g, tt, s ), -sign );
            };
            if( t > 0 )
            {
               out_terms( t, 1.0 );
               out_terms( t - 1, -1.0 );
               row( fmt::format( "s2.ramp_up.{}.{}", gen.id, sfx ), Sense::le, R );
               out_terms( t, 1.0 );
               out_terms( t - 1, -1.0 );
               row( fmt::format( "s2.ramp_dn.{}.{}", gen.id, sfx ), Sense::ge, -R );
            }
            else if( auto it = opt.initial_dispatch.find( gen.id ); it != opt.initial_dispatch.end() )
            {
               out_terms( t, 1.0 );
               row( fmt::format( "s2.ramp_up.{}.{}", gen.id, sfx ), Sense::le, it->second + R );
               out_terms( t, 1.0 );
               row( fmt::format( "s2.ramp_dn.{}.{}", gen.id, sfx ), Sense::ge, it->second - R );
            }
         }
         for( int g : non_regulating )
         {
            term( ix.col( VarKind::gen_curtail_s, g, t, s ), 1.0 );
            term( ix.col( VarKind::gen, g, t ), -1.0 );
            row( fmt::format( "s2.gcurt.{}.{}", c.generators[sz( g )].id, sfx ), Sense::le, 0.0 );
         }
         network_and_storage( t, s );
      }

   return ef;
}

/// Number of charge/discharge indicators: |B| * |T| * 2 * (1 + K).
inline int expected_indicator_count( const GridCase& c, int horizon, int scenarios )
{
   return static_cast<int>( c.storage_units.size() ) * horizon * 2 * ( 1 + scenarios );
}

} // namespace sded
