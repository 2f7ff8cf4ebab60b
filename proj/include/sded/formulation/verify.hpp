#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/formulation/solution.hpp"

namespace sded
{

struct FamilyResidual
{
   std::string stage;  // "first" or "second"
   std::string family; // e.g. "balance"
   double max_residual = 0.0;
   std::string worst; // location of the largest residual

   std::string label() const { return stage + "." + family; }
};

struct VerificationReport
{
   std::vector<FamilyResidual> families;
   double tolerance = 1e-6;

   bool passed() const
   {
      return std::all_of( families.begin(), families.end(),
                          [&]( const FamilyResidual& f ) { return f.max_residual <= tolerance; } );
   }

   double max_residual() const
   {
      double m = 0.0;
      for( const auto& f : families )
         m = std::max( m, f.max_residual );
      return m;
   }

   const FamilyResidual& family( const std::string& stage, const std::string& name ) const
   {
      for( const auto& f : families )
         if( f.stage == stage && f.family == name )
            return f;
      throw std::out_of_range( fmt::format( "no constraint family {}.{}", stage, name ) );
   }

   std::vector<std::string> failures() const
   {
      std::vector<std::string> out;
      for( const auto& f : families )
         if( f.max_residual > tolerance )
            out.push_back( fmt::format( "{}: residual {:.3g} at {}", f.label(), f.max_residual, f.worst ) );
      return out;
   }
};

namespace detail
{

class ResidualSink
{
 public:
   ResidualSink( VerificationReport& r, std::string stage, std::vector<std::string> names ) : report_( r )
   {
      for( auto& n : names )
         report_.families.push_back( { stage, std::move( n ), 0.0, {} } );
      first_ = report_.families.size() - names.size();
      names_count_ = names.size();
   }

   template <typename Loc>
   void put( const std::string& family, double residual, Loc&& where )
   {
      auto& f = find( family );
      if( residual > f.max_residual || ( std::isnan( residual ) && !std::isnan( f.max_residual ) ) )
      {
         f.max_residual = std::isnan( residual ) ? std::numeric_limits<double>::infinity() : residual;
         f.worst = where();
      }
   }

 private:
   FamilyResidual& find( const std::string& family )
   {
      for( std::size_t k = first_; k < first_ + names_count_; ++k )
         if( report_.families[k].family == family )
            return report_.families[k];
      throw std::logic_error( "unknown residual family " + family );
   }

   VerificationReport& report_;
   std::size_t first_ = 0;
   std::size_t names_count_ = 0;
};

inline double excess( double v, double lo, double hi ) { return std::max( { 0.0, lo - v, v - hi } ); }

} // namespace detail

/// Replays every constraint family on a dispatch and reports the largest residual of each.
///
/// Residuals are in MW for power quantities, radians for angles, and
/// fractions of energy capacity for SOC.
inline VerificationReport verify_solution( const DispatchSolution& sol, const GridCase& c, const ScenarioSet& scen,
                                           const CostParams& costs, const ModelOptions& opt = {},
                                           double tolerance = 1e-6 )
{
   check_dimensions( c, scen );
   const int T = static_cast<int>( scen.horizon() );
   const int K = static_cast<int>( scen.size() );
   if( sol.horizon() != T || static_cast<int>( sol.scenarios.size() ) != K )
      throw DimensionMismatch( fmt::format( "solution is {} steps x {} scenarios, data is {} x {}", sol.horizon(),
                                            sol.scenarios.size(), T, K ) );
   const double dt = costs.dt_hours;
   const auto sz = []( auto i ) { return static_cast<std::size_t>( i ); };

   VerificationReport rep;
   rep.tolerance = tolerance;

   // Data shared by both stages.
   std::vector<int> gen_bus, wind_bus, stor_bus, from, to;
   for( const auto& g : c.generators )
      gen_bus.push_back( c.bus_index( g.bus ) );
   for( const auto& w : c.wind_plants )
      wind_bus.push_back( c.bus_index( w.bus ) );
   for( const auto& b : c.storage_units )
      stor_bus.push_back( c.bus_index( b.bus ) );
   for( const auto& l : c.lines )
   {
      from.push_back( c.bus_index( l.from_bus ) );
      to.push_back( c.bus_index( l.to_bus ) );
   }
   const int ref = c.reference_index();

   auto check_network = [&]( detail::ResidualSink& sink, const StageDispatch& d, int t, const std::string& tag ) {
      for( std::size_t l = 0; l < c.lines.size(); ++l )
      {
         const auto& ln = c.lines[l];
         const auto li = static_cast<Eigen::Index>( l );
         double di = d.angle( t, from[l] ), dj = d.angle( t, to[l] );
         double p = d.flow( t, li );
         double expect = c.base_mva * dc_flow_pu( ln.susceptance_pu, di, dj, ln.phase_shift_rad );
         sink.put( "flow_definition", std::abs( p - expect ), [&] { return fmt::format( "line {} {}", l, tag ); } );
         sink.put( "flow_limit", std::max( 0.0, std::abs( p ) - ln.limit_mw ),
                   [&] { return fmt::format( "line {} {}", l, tag ); } );
         sink.put( "angle_difference", detail::excess( di - dj, ln.angle_min_rad, ln.angle_max_rad ),
                   [&] { return fmt::format( "line {} {}", l, tag ); } );
      }
      if( ref >= 0 )
         sink.put( "angle_difference", std::abs( d.angle( t, ref ) ),
                   [&] { return fmt::format( "reference angle {}", tag ); } );
   };

   auto check_storage = [&]( detail::ResidualSink& sink, const StageDispatch& d, int t, const std::string& tag ) {
      for( std::size_t b = 0; b < c.storage_units.size(); ++b )
      {
         const auto& u = c.storage_units[b];
         const auto bi = static_cast<Eigen::Index>( b );
         double ch = d.charge( t, bi ), dis = d.discharge( t, bi );
         double gc = d.gamma_ch( t, bi ), gd = d.gamma_dis( t, bi );
         auto where = [&] { return fmt::format( "{} {}", u.id, tag ); };
         sink.put( "charge_limit", std::max( { 0.0, -ch, ch - gc * u.rating_mw } ), where );
         sink.put( "discharge_limit", std::max( { 0.0, -dis, dis - gd * u.rating_mw } ), where );
         double integrality = std::max( std::abs( gc - std::round( gc ) ), std::abs( gd - std::round( gd ) ) );
         sink.put( "complementarity",
                   std::max( { 0.0, std::min( ch, dis ), gc + gd - 1.0, integrality, detail::excess( gc, 0.0, 1.0 ),
                               detail::excess( gd, 0.0, 1.0 ) } ),
                   where );
         double prev = t == 0 ? u.soc_init : d.soc( t - 1, bi );
         double expect = soc_step( prev, ch, dis, u.eta_ch, u.eta_dis, dt, u.energy_cap_mwh );
         sink.put( "soc_recursion", std::abs( d.soc( t, bi ) - expect ), where );
         double lo = u.soc_min;
         if( opt.terminal_soc && t == T - 1 )
            lo = std::max( lo, *opt.terminal_soc );
         sink.put( "soc_bounds", detail::excess( d.soc( t, bi ), lo, u.soc_max ), where );
      }
   };

   // ---- first stage -------------------------------------------------------
   {
      detail::ResidualSink sink( rep, "first",
                                 { "balance", "flow_definition", "flow_limit", "angle_difference", "ramp",
                                   "generation_bounds", "charge_limit", "discharge_limit", "complementarity",
                                   "soc_recursion", "soc_bounds", "wind_curtailment_bounds",
                                   "load_curtailment_bounds", "gen_curtailment_bounds" } );
      const auto& d = sol.first;
      for( int t = 0; t < T; ++t )
      {
         const auto tag = fmt::format( "t{}", t );
         std::vector<double> net( c.buses.size(), 0.0 );
         for( std::size_t g = 0; g < c.generators.size(); ++g )
            net[sz( gen_bus[g] )] += sol.gen( t, static_cast<Eigen::Index>( g ) ) -
                                     d.gen_curtail( t, static_cast<Eigen::Index>( g ) );
         for( std::size_t w = 0; w < c.wind_plants.size(); ++w )
            net[sz( wind_bus[w] )] +=
                scen.forecast_wind( t, static_cast<Eigen::Index>( w ) ) - d.wind_curtail( t, static_cast<Eigen::Index>( w ) );
         for( std::size_t b = 0; b < c.storage_units.size(); ++b )
            net[sz( stor_bus[b] )] +=
                d.discharge( t, static_cast<Eigen::Index>( b ) ) - d.charge( t, static_cast<Eigen::Index>( b ) );
         for( std::size_t l = 0; l < c.lines.size(); ++l )
         {
            net[sz( to[l] )] += d.flow( t, static_cast<Eigen::Index>( l ) );
            net[sz( from[l] )] -= d.flow( t, static_cast<Eigen::Index>( l ) );
         }
         for( std::size_t i = 0; i < c.buses.size(); ++i )
         {
            const auto ii = static_cast<Eigen::Index>( i );
            double r = net[i] - ( scen.forecast_load( t, ii ) - d.load_curtail( t, ii ) );
            sink.put( "balance", std::abs( r ), [&] { return fmt::format( "bus {} {}", c.buses[i].id, tag ); } );
            sink.put( "load_curtailment_bounds",
                      detail::excess( d.load_curtail( t, ii ), 0.0, std::max( 0.0, scen.forecast_load( t, ii ) ) ),
                      [&] { return fmt::format( "bus {} {}", c.buses[i].id, tag ); } );
         }
         for( std::size_t w = 0; w < c.wind_plants.size(); ++w )
         {
            const auto wi = static_cast<Eigen::Index>( w );
            sink.put( "wind_curtailment_bounds",
                      detail::excess( d.wind_curtail( t, wi ), 0.0, std::max( 0.0, scen.forecast_wind( t, wi ) ) ),
                      [&] { return fmt::format( "{} {}", c.wind_plants[w].id, tag ); } );
         }
         for( std::size_t g = 0; g < c.generators.size(); ++g )
         {
            const auto& gen = c.generators[g];
            const auto gi = static_cast<Eigen::Index>( g );
            double x = sol.gen( t, gi );
            auto where = [&] { return fmt::format( "{} {}", gen.id, tag ); };
            sink.put( "generation_bounds", detail::excess( x, gen.p_min_mw, gen.p_max_mw ), where );
            sink.put( "gen_curtailment_bounds", detail::excess( d.gen_curtail( t, gi ), 0.0, x ), where );
            double R = ramp_limit_mw( gen, dt );
            if( t > 0 )
               sink.put( "ramp", std::max( 0.0, std::abs( x - sol.gen( t - 1, gi ) ) - R ), where );
            else if( auto it = opt.initial_dispatch.find( gen.id ); it != opt.initial_dispatch.end() )
               sink.put( "ramp", std::max( 0.0, std::abs( x - it->second ) - R ), where );
         }
         check_network( sink, d, t, tag );
         check_storage( sink, d, t, tag );
      }
   }

   // ---- second stage ------------------------------------------------------
   {
      detail::ResidualSink sink( rep, "second",
                                 { "balance", "regulation_up_headroom", "regulation_down_headroom", "regulation_ramp",
                                   "regulation_nonnegativity", "flow_definition", "flow_limit", "angle_difference",
                                   "charge_limit", "discharge_limit", "complementarity", "soc_recursion",
                                   "soc_bounds", "wind_curtailment_bounds", "load_curtailment_bounds",
                                   "gen_curtailment_bounds" } );
      for( int s = 0; s < K; ++s )
      {
         const auto& d = sol.scenarios[sz( s )];
         const auto& load = scen.load[sz( s )];
         const auto& wind = scen.wind[sz( s )];
         for( int t = 0; t < T; ++t )
         {
            const auto tag = fmt::format( "t{} scenario {}", t, s );
            std::vector<double> net( c.buses.size(), 0.0 );
            for( std::size_t g = 0; g < c.generators.size(); ++g )
            {
               const auto& gen = c.generators[g];
               const auto gi = static_cast<Eigen::Index>( g );
               double x = sol.gen( t, gi );
               double up = d.reg_up( t, gi ), dn = d.reg_down( t, gi ), cut = d.gen_curtail( t, gi );
               auto where = [&] { return fmt::format( "{} {}", gen.id, tag ); };
               if( gen.provides_regulation )
               {
                  net[sz( gen_bus[g] )] += x + up - dn;
                  sink.put( "regulation_up_headroom", std::max( 0.0, x + up - gen.p_max_mw ), where );
                  sink.put( "regulation_down_headroom", std::max( 0.0, gen.p_min_mw - ( x - dn ) ), where );
                  sink.put( "regulation_nonnegativity", std::max( { 0.0, -up, -dn } ), where );
                  sink.put( "gen_curtailment_bounds", std::abs( cut ), where );
                  double R = ramp_limit_mw( gen, dt );
                  double out = x + up - dn;
                  if( t > 0 )
                  {
                     double prev = sol.gen( t - 1, gi ) + d.reg_up( t - 1, gi ) - d.reg_down( t - 1, gi );
                     sink.put( "regulation_ramp", std::max( 0.0, std::abs( out - prev ) - R ), where );
                  }
                  else if( auto it = opt.initial_dispatch.find( gen.id ); it != opt.initial_dispatch.end() )
                     sink.put( "regulation_ramp", std::max( 0.0, std::abs( out - it->second ) - R ), where );
               }
               else
               {
                  net[sz( gen_bus[g] )] += x - cut;
                  sink.put( "regulation_nonnegativity", std::max( std::abs( up ), std::abs( dn ) ), where );
                  sink.put( "gen_curtailment_bounds", detail::excess( cut, 0.0, x ), where );
               }
            }
            for( std::size_t w = 0; w < c.wind_plants.size(); ++w )
            {
               const auto wi = static_cast<Eigen::Index>( w );
               net[sz( wind_bus[w] )] += wind( t, wi ) - d.wind_curtail( t, wi );
               sink.put( "wind_curtailment_bounds",
                         detail::excess( d.wind_curtail( t, wi ), 0.0, std::max( 0.0, wind( t, wi ) ) ),
                         [&] { return fmt::format( "{} {}", c.wind_plants[w].id, tag ); } );
            }
            for( std::size_t b = 0; b < c.storage_units.size(); ++b )
               net[sz( stor_bus[b] )] +=
                   d.discharge( t, static_cast<Eigen::Index>( b ) ) - d.charge( t, static_cast<Eigen::Index>( b ) );
            for( std::size_t l = 0; l < c.lines.size(); ++l )
            {
               net[sz( to[l] )] += d.flow( t, static_cast<Eigen::Index>( l ) );
               net[sz( from[l] )] -= d.flow( t, static_cast<Eigen::Index>( l ) );
            }
            for( std::size_t i = 0; i < c.buses.size(); ++i )
            {
               const auto ii = static_cast<Eigen::Index>( i );
               double r = net[i] - ( load( t, ii ) - d.load_curtail( t, ii ) );
               sink.put( "balance", std::abs( r ), [&] { return fmt::format( "bus {} {}", c.buses[i].id, tag ); } );
               sink.put( "load_curtailment_bounds",
                         detail::excess( d.load_curtail( t, ii ), 0.0, std::max( 0.0, load( t, ii ) ) ),
                         [&] { return fmt::format( "bus {} {}", c.buses[i].id, tag ); } );
            }
            check_network( sink, d, t, tag );
            check_storage( sink, d, t, tag );
         }
      }
   }
   return rep;
}

} // namespace sded
