#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/formulation/build.hpp"
#include "sded/milp/branch_and_bound.hpp"

namespace sded
{

/// Rows are timesteps; columns follow the case's entity lists.
struct StageDispatch
{
   Eigen::MatrixXd gen_curtail;  // T x G
   Eigen::MatrixXd wind_curtail; // T x W
   Eigen::MatrixXd load_curtail; // T x N
   Eigen::MatrixXd charge;       // T x B
   Eigen::MatrixXd discharge;    // T x B
   Eigen::MatrixXd gamma_ch;     // T x B
   Eigen::MatrixXd gamma_dis;    // T x B
   Eigen::MatrixXd soc;          // T x B (fraction)
   Eigen::MatrixXd angle;        // T x N (rad)
   Eigen::MatrixXd flow;         // T x L (MW)

   /// Discharge minus charge; negative means net charging.
   Eigen::MatrixXd battery_dispatch() const { return discharge - charge; }
};

struct ScenarioDispatch : StageDispatch
{
   Eigen::MatrixXd reg_up;   // T x G, zero for non-regulating units
   Eigen::MatrixXd reg_down; // T x G
};

struct CostBreakdown
{
   double generation = 0.0;        // piecewise-linear generation cost
   double battery = 0.0;           // first-stage charge/discharge cost
   double curtailment = 0.0;       // first-stage curtailment penalties
   double expected_recourse = 0.0; // probability-weighted second-stage cost
   double total = 0.0;

   double component_sum() const { return generation + battery + curtailment + expected_recourse; }
};

struct DispatchSolution
{
   Eigen::MatrixXd gen; // T x G
   StageDispatch first;
   std::vector<ScenarioDispatch> scenarios;
   std::vector<double> probs;
   CostBreakdown cost;
   double objective = 0.0; // raw model objective

   int horizon() const { return static_cast<int>( gen.rows() ); }

   /// Probability-weighted second-stage wind curtailment energy (MWh).
   double expected_wind_curtailment_mwh( double dt_hours ) const
   {
      double e = 0.0;
      for( std::size_t k = 0; k < scenarios.size(); ++k )
         e += probs[k] * scenarios[k].wind_curtail.sum() * dt_hours;
      return e;
   }

   double first_stage_wind_curtailment_mwh( double dt_hours ) const { return first.wind_curtail.sum() * dt_hours; }
};

/// Second-stage cost of one scenario ($), all terms scaled by dt.
inline double scenario_cost( const GridCase& c, const CostParams& costs, const ScenarioDispatch& s )
{
   double v = 0.0;
   for( Eigen::Index g = 0; g < s.reg_up.cols(); ++g )
   {
      double r = costs.regulation_multiplier * c.generators[static_cast<std::size_t>( g )].cost_b;
      v += r * ( s.reg_up.col( g ).sum() + s.reg_down.col( g ).sum() );
   }
   v += costs.c_wind_curtail * s.wind_curtail.sum();
   v += costs.c_charge * s.charge.sum() + costs.c_discharge * s.discharge.sum();
   v += costs.c_load_curtail * s.load_curtail.sum();
   v += costs.c_gen_curtail * s.gen_curtail.sum();
   return v * costs.dt_hours;
}

inline CostBreakdown compute_costs( const GridCase& c, const CostParams& costs, const DispatchSolution& d )
{
   CostBreakdown cb;
   const double dt = costs.dt_hours;
   for( Eigen::Index g = 0; g < d.gen.cols(); ++g )
   {
      auto segs = pwl_segments( c.generators[static_cast<std::size_t>( g )], costs.pwl_segments );
      for( Eigen::Index t = 0; t < d.gen.rows(); ++t )
         cb.generation += dt * pwl_cost( segs, d.gen( t, g ) );
   }
   cb.battery = dt * ( costs.c_charge * d.first.charge.sum() + costs.c_discharge * d.first.discharge.sum() );
   cb.curtailment = dt * ( costs.c_gen_curtail * d.first.gen_curtail.sum() +
                           costs.c_load_curtail * d.first.load_curtail.sum() +
                           costs.c_wind_curtail * d.first.wind_curtail.sum() );
   for( std::size_t k = 0; k < d.scenarios.size(); ++k )
      cb.expected_recourse += d.probs[k] * scenario_cost( c, costs, d.scenarios[k] );
   cb.total = cb.component_sum();
   return cb;
}

/// Maps raw column values back onto dispatch trajectories.
inline DispatchSolution extract_solution( const std::vector<double>& values, const VarIndex& ix, const GridCase& c,
                                          const ScenarioSet& scen, const CostParams& costs )
{
   if( static_cast<int>( values.size() ) != ix.size() )
      throw IndexMismatch( fmt::format( "solution has {} values, index covers {} columns", values.size(), ix.size() ) );
   const int T = ix.horizon();
   const int K = ix.scenarios();
   if( static_cast<int>( scen.size() ) != K || static_cast<int>( scen.horizon() ) != T )
      throw IndexMismatch( fmt::format( "index is for {} scenarios x {} steps, scenario set has {} x {}", K, T,
                                        scen.size(), scen.horizon() ) );
   const auto G = static_cast<Eigen::Index>( c.generators.size() );
   const auto W = static_cast<Eigen::Index>( c.wind_plants.size() );
   const auto N = static_cast<Eigen::Index>( c.buses.size() );
   const auto L = static_cast<Eigen::Index>( c.lines.size() );
   const auto B = static_cast<Eigen::Index>( c.storage_units.size() );

   auto fill = [&]( Eigen::MatrixXd& mat, VarKind kind, Eigen::Index n, int s ) {
      mat = Eigen::MatrixXd::Zero( T, n );
      for( Eigen::Index e = 0; e < n; ++e )
      {
         if( !ix.has( kind, static_cast<int>( e ) ) )
            continue;
         for( int t = 0; t < T; ++t )
            mat( t, e ) = values[static_cast<std::size_t>( ix.col( kind, static_cast<int>( e ), t, s ) )];
      }
   };

   DispatchSolution d;
   d.probs = scen.probs;
   fill( d.gen, VarKind::gen, G, -1 );
   auto& f = d.first;
   fill( f.gen_curtail, VarKind::gen_curtail, G, -1 );
   fill( f.wind_curtail, VarKind::wind_curtail, W, -1 );
   fill( f.load_curtail, VarKind::load_curtail, N, -1 );
   fill( f.charge, VarKind::charge, B, -1 );
   fill( f.discharge, VarKind::discharge, B, -1 );
   fill( f.gamma_ch, VarKind::gamma_ch, B, -1 );
   fill( f.gamma_dis, VarKind::gamma_dis, B, -1 );
   fill( f.soc, VarKind::soc, B, -1 );
   fill( f.angle, VarKind::angle, N, -1 );
   fill( f.flow, VarKind::flow, L, -1 );
   d.scenarios.resize( static_cast<std::size_t>( K ) );
   for( int s = 0; s < K; ++s )
   {
      auto& sd = d.scenarios[static_cast<std::size_t>( s )];
      fill( sd.reg_up, VarKind::reg_up, G, s );
      fill( sd.reg_down, VarKind::reg_down, G, s );
      fill( sd.gen_curtail, VarKind::gen_curtail_s, G, s );
      fill( sd.wind_curtail, VarKind::wind_curtail_s, W, s );
      fill( sd.load_curtail, VarKind::load_curtail_s, N, s );
      fill( sd.charge, VarKind::charge_s, B, s );
      fill( sd.discharge, VarKind::discharge_s, B, s );
      fill( sd.gamma_ch, VarKind::gamma_ch_s, B, s );
      fill( sd.gamma_dis, VarKind::gamma_dis_s, B, s );
      fill( sd.soc, VarKind::soc_s, B, s );
      fill( sd.angle, VarKind::angle_s, N, s );
      fill( sd.flow, VarKind::flow_s, L, s );
   }
   d.cost = compute_costs( c, costs, d );
   d.objective = d.cost.total;
   return d;
}

inline DispatchSolution extract_solution( const milp::MipSolution& raw, const VarIndex& ix, const GridCase& c,
                                          const ScenarioSet& scen, const CostParams& costs )
{
   if( !raw.has_incumbent() )
      throw IndexMismatch( "solution carries no values" );
   auto d = extract_solution( raw.values, ix, c, scen, costs );
   d.objective = raw.objective;
   return d;
}

} // namespace sded
