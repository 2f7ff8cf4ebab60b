#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/formulation/build.hpp"
#include "sded/formulation/solution.hpp"
#include "sded/milp/branch_and_bound.hpp"
#include "sded/milp/external.hpp"

namespace sded
{

enum class SolverKind
{
   internal,          // branch-and-bound on the full model
   internal_fastpath, // LP without indicators first, B&B only when complementarity breaks
   external           // subprocess backend
};

struct SolverChoice
{
   SolverKind kind = SolverKind::internal_fastpath;
   std::string command; // external only

   /// Accepts "internal", "internal-fastpath" or "external:<cmd>".
   static SolverChoice parse( const std::string& s )
   {
      if( s == "internal" )
         return { SolverKind::internal, {} };
      if( s == "internal-fastpath" )
         return { SolverKind::internal_fastpath, {} };
      if( s.rfind( "external:", 0 ) == 0 && s.size() > 9 )
         return { SolverKind::external, s.substr( 9 ) };
      throw ConfigError( fmt::format( "unknown solver '{}' (expected internal, internal-fastpath or external:<cmd>)",
                                      s ) );
   }

   std::string to_string() const
   {
      switch( kind )
      {
      case SolverKind::internal:
         return "internal";
      case SolverKind::internal_fastpath:
         return "internal-fastpath";
      case SolverKind::external:
         return "external:" + command;
      }
      return "?";
   }

   bool operator==( const SolverChoice& ) const = default;
};

struct SolveOptions
{
   SolverChoice solver;
   milp::MipOptions mip;
   double complementarity_tol = 1e-6; // MW; both sides above this counts as simultaneous
};

struct SolveReport
{
   DispatchSolution dispatch;
   milp::MipSolution raw;
   std::string solver;
   bool fastpath_accepted = false;
   int complementarity_violations = 0; // pairs found in the indicator-free LP
   double wall_seconds = 0.0;
};

namespace detail
{

struct IndicatorPair
{
   int ch, dis, gamma_ch, gamma_dis;
};

inline std::vector<IndicatorPair> indicator_pairs( const VarIndex& ix, int B )
{
   std::vector<IndicatorPair> out;
   const int T = ix.horizon();
   for( int b = 0; b < B; ++b )
      for( int t = 0; t < T; ++t )
      {
         out.push_back( { ix.col( VarKind::charge, b, t ), ix.col( VarKind::discharge, b, t ),
                          ix.col( VarKind::gamma_ch, b, t ), ix.col( VarKind::gamma_dis, b, t ) } );
         for( int s = 0; s < ix.scenarios(); ++s )
            out.push_back( { ix.col( VarKind::charge_s, b, t, s ), ix.col( VarKind::discharge_s, b, t, s ),
                             ix.col( VarKind::gamma_ch_s, b, t, s ), ix.col( VarKind::gamma_dis_s, b, t, s ) } );
      }
   return out;
}

inline milp::MipSolution fastpath_solve( const ExtensiveForm& ef, int B, const SolveOptions& opt, int& violations,
                                         bool& accepted )
{
   using namespace milp;
   accepted = false;
   violations = 0;
   const auto pairs = indicator_pairs( ef.index, B );

   MilpModel relaxed = ef.model;
   for( auto& v : relaxed.variables() )
      v.is_binary = false;
   LpEngine engine( relaxed, opt.mip.lp );
   LpSolution lp = engine.solve();
   if( lp.status == LpStatus::infeasible )
   {
      MipSolution out;
      out.status = MipStatus::infeasible;
      out.lp_iterations = lp.iterations;
      return out;
   }

   std::vector<int> priority;
   if( lp.status == LpStatus::optimal )
   {
      auto lo = engine.lower(), hi = engine.upper();
      for( const auto& p : pairs )
      {
         double ch = lp.x[static_cast<std::size_t>( p.ch )], dis = lp.x[static_cast<std::size_t>( p.dis )];
         if( ch > opt.complementarity_tol && dis > opt.complementarity_tol )
         {
            ++violations;
            priority.push_back( p.gamma_ch );
            priority.push_back( p.gamma_dis );
            continue;
         }
         double gc = ch > opt.complementarity_tol && ch >= dis ? 1.0 : 0.0;
         double gd = gc == 0.0 && dis > opt.complementarity_tol ? 1.0 : 0.0;
         lo[static_cast<std::size_t>( p.gamma_ch )] = hi[static_cast<std::size_t>( p.gamma_ch )] = gc;
         lo[static_cast<std::size_t>( p.gamma_dis )] = hi[static_cast<std::size_t>( p.gamma_dis )] = gd;
      }
      if( violations == 0 )
      {
         LpSolution fixed = engine.solve( lo, hi, &lp.basis );
         if( fixed.status == LpStatus::optimal )
         {
            double gap = relative_gap( fixed.objective, lp.objective );
            if( gap <= opt.mip.rel_gap )
            {
               accepted = true;
               MipSolution out;
               out.status = MipStatus::optimal;
               out.values = std::move( fixed.x );
               for( const auto& p : pairs )
                  for( int j : { p.gamma_ch, p.gamma_dis } )
                     out.values[static_cast<std::size_t>( j )] = lo[static_cast<std::size_t>( j )];
               out.objective = fixed.objective;
               out.bound = std::min( lp.objective, fixed.objective );
               out.gap = std::max( 0.0, gap );
               out.lp_iterations = lp.iterations + fixed.iterations;
               out.trace.push_back( { out.bound, out.objective } );
               return out;
            }
         }
      }
   }

   auto mo = opt.mip;
   mo.priority = priority;
   auto out = branch_and_bound( ef.model, mo );
   out.lp_iterations += lp.iterations;
   return out;
}

} // namespace detail

/// Solves a built extensive form and maps the result back to dispatch quantities.
///
/// Throws SolveFailure when the model is infeasible or no incumbent was found.
inline SolveReport solve_extensive_form( const ExtensiveForm& ef, const GridCase& c, const ScenarioSet& scen,
                                         const CostParams& costs, const SolveOptions& opt = {} )
{
   const auto t0 = std::chrono::steady_clock::now();
   SolveReport rep;
   rep.solver = opt.solver.to_string();
   try
   {
      switch( opt.solver.kind )
      {
      case SolverKind::internal:
         rep.raw = milp::branch_and_bound( ef.model, opt.mip );
         break;
      case SolverKind::internal_fastpath:
         rep.raw = detail::fastpath_solve( ef, static_cast<int>( c.storage_units.size() ), opt,
                                           rep.complementarity_violations, rep.fastpath_accepted );
         break;
      case SolverKind::external:
         rep.raw = milp::solve_external( ef.model, opt.solver.command );
         break;
      }
   }
   catch( const NoFeasibleFound& e )
   {
      throw SolveFailure( fmt::format( "{}: {}", rep.solver, e.what() ) );
   }
   if( !rep.raw.has_incumbent() )
      throw SolveFailure( fmt::format( "{}: model is {}", rep.solver, milp::to_string( rep.raw.status ) ) );
   rep.dispatch = extract_solution( rep.raw, ef.index, c, scen, costs );
   rep.wall_seconds = std::chrono::duration<double>( std::chrono::steady_clock::now() - t0 ).count();
   return rep;
}

/// Builds and solves in one call.
inline SolveReport solve_dispatch( const GridCase& c, const ScenarioSet& scen, const CostParams& costs,
                                   const SolveOptions& opt = {}, const ModelOptions& mopt = {} )
{
   auto ef = build_extensive_form( c, scen, costs, mopt );
   return solve_extensive_form( ef, c, scen, costs, opt );
}

} // namespace sded
