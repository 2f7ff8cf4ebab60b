#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <queue>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/milp/model.hpp"
#include "sded/milp/simplex.hpp"

namespace sded::milp
{

enum class MipStatus
{
   optimal,
   infeasible,
   unbounded,
   node_limit,
   time_limit
};

inline const char* to_string( MipStatus s )
{
   switch( s )
   {
   case MipStatus::optimal:
      return "optimal";
   case MipStatus::infeasible:
      return "infeasible";
   case MipStatus::unbounded:
      return "unbounded";
   case MipStatus::node_limit:
      return "node_limit";
   case MipStatus::time_limit:
      return "time_limit";
   }
   return "unknown";
}

struct MipOptions
{
   double rel_gap = 1e-6;
   double int_tol = 1e-6;
   std::int64_t node_limit = std::numeric_limits<std::int64_t>::max();
   double time_limit_s = std::numeric_limits<double>::infinity();
   /// Binaries branched on first (in list order) while fractional.
   std::vector<int> priority;
   bool rounding_heuristic = true;
   int heuristic_frequency = 25;
   LpOptions lp;
};

struct BoundTrace
{
   double bound;
   double incumbent;
};

struct MipSolution
{
   MipStatus status = MipStatus::infeasible;
   std::vector<double> values;
   double objective = kInf;
   double bound = -kInf;
   double gap = kInf;
   std::int64_t nodes = 0;
   std::int64_t lp_iterations = 0;
   std::vector<BoundTrace> trace;

   bool has_incumbent() const { return !values.empty(); }
};

inline double relative_gap( double incumbent, double bound )
{
   if( !std::isfinite( incumbent ) )
      return kInf;
   return ( incumbent - bound ) / std::max( 1.0, std::abs( incumbent ) );
}

namespace detail
{

struct Fixing
{
   int var;
   double value;
};

struct Node
{
   std::int64_t id;
   double bound;
   std::vector<Fixing> fixings;
   std::shared_ptr<const Basis> basis;
};

struct NodeOrder
{
   bool operator()( const Node& a, const Node& b ) const
   {
      if( a.bound != b.bound )
         return a.bound > b.bound;
      return a.id > b.id;
   }
};

/// Snaps binaries and re-solves the LP with all of them fixed.
inline bool polish( LpEngine& engine, const std::vector<int>& binaries, std::vector<double> lo,
                    std::vector<double> hi, const std::vector<double>& x, const Basis* basis, LpSolution& out )
{
   for( int j : binaries )
   {
      double v = std::round( x[static_cast<std::size_t>( j )] );
      lo[static_cast<std::size_t>( j )] = v;
      hi[static_cast<std::size_t>( j )] = v;
   }
   out = engine.solve( lo, hi, basis );
   if( out.status != LpStatus::optimal )
      return false;
   for( int j : binaries )
      out.x[static_cast<std::size_t>( j )] = lo[static_cast<std::size_t>( j )];
   return true;
}

} // namespace detail

/// Best-bound branch and bound over the binary variables of a model.
///
/// Nodes are ordered by (LP bound, node id) so the search is reproducible.
/// Children inherit the parent's optimal basis as a warm start.
inline MipSolution branch_and_bound( const MilpModel& model, const MipOptions& opt = {} )
{
   model.require_valid();
   const auto start = std::chrono::steady_clock::now();
   auto elapsed = [&] {
      return std::chrono::duration<double>( std::chrono::steady_clock::now() - start ).count();
   };

   LpEngine engine( model, opt.lp );
   const auto binaries = model.binary_indices();
   std::vector<int> rank( static_cast<std::size_t>( model.num_variables() ), -1 );
   for( std::size_t k = 0; k < opt.priority.size(); ++k )
   {
      int j = opt.priority[k];
      if( j >= 0 && j < model.num_variables() && rank[static_cast<std::size_t>( j )] < 0 )
         rank[static_cast<std::size_t>( j )] = static_cast<int>( k );
   }

   MipSolution out;
   double incumbent = kInf;
   auto offer = [&]( const LpSolution& s ) {
      if( s.objective < incumbent )
      {
         incumbent = s.objective;
         out.values = s.x;
      }
   };

   auto bounds_for = [&]( const std::vector<detail::Fixing>& fx ) {
      std::pair<std::vector<double>, std::vector<double>> b{ engine.lower(), engine.upper() };
      for( const auto& f : fx )
      {
         b.first[static_cast<std::size_t>( f.var )] = f.value;
         b.second[static_cast<std::size_t>( f.var )] = f.value;
      }
      return b;
   };

   auto pick_branch = [&]( const std::vector<double>& x ) {
      int best = -1;
      double best_frac = -1.0;
      int best_rank = std::numeric_limits<int>::max();
      for( int j : binaries )
      {
         double v = x[static_cast<std::size_t>( j )];
         double frac = std::abs( v - std::round( v ) );
         if( frac <= opt.int_tol )
            continue;
         int r = rank[static_cast<std::size_t>( j )];
         if( r >= 0 )
         {
            if( r < best_rank )
            {
               best_rank = r;
               best = j;
            }
            continue;
         }
         if( best_rank == std::numeric_limits<int>::max() && frac > best_frac )
         {
            best_frac = frac;
            best = j;
         }
      }
      return best;
   };

   auto try_rounding = [&]( const std::vector<double>& lo, const std::vector<double>& hi,
                            const std::vector<double>& x, const Basis* basis ) {
      // Nearest with ties going down, then everything down.
      for( int pass = 0; pass < 2; ++pass )
      {
         std::vector<double> r = x;
         for( int j : binaries )
         {
            double& v = r[static_cast<std::size_t>( j )];
            v = pass == 0 ? ( v > 0.5 + opt.int_tol ? 1.0 : 0.0 ) : std::floor( v + opt.int_tol );
            v = std::clamp( v, lo[static_cast<std::size_t>( j )], hi[static_cast<std::size_t>( j )] );
         }
         LpSolution s;
         bool ok = detail::polish( engine, binaries, lo, hi, r, basis, s );
         out.lp_iterations += s.iterations;
         if( ok )
         {
            offer( s );
            return;
         }
      }
   };

   std::priority_queue<detail::Node, std::vector<detail::Node>, detail::NodeOrder> open;
   std::int64_t next_id = 0;
   open.push( { next_id++, -kInf, {}, nullptr } );
   MipStatus limit_status = MipStatus::optimal;
   double global_bound = -kInf;

   while( !open.empty() )
   {
      global_bound = std::max( global_bound, std::min( open.top().bound, incumbent ) );
      if( relative_gap( incumbent, open.top().bound ) <= opt.rel_gap )
         break;
      if( out.nodes >= opt.node_limit )
      {
         limit_status = MipStatus::node_limit;
         break;
      }
      if( elapsed() > opt.time_limit_s )
      {
         limit_status = MipStatus::time_limit;
         break;
      }

      auto node = open.top();
      open.pop();
      ++out.nodes;

      auto [lo, hi] = bounds_for( node.fixings );
      auto lp = engine.solve( lo, hi, node.basis.get() );
      out.lp_iterations += lp.iterations;
      if( lp.status == LpStatus::iteration_limit || lp.status == LpStatus::time_limit )
      {
         open.push( node );
         limit_status = MipStatus::time_limit;
         break;
      }
      if( lp.status == LpStatus::unbounded )
      {
         if( node.id == 0 )
         {
            out.status = MipStatus::unbounded;
            return out;
         }
         continue;
      }
      if( lp.status == LpStatus::infeasible )
      {
         out.trace.push_back( { global_bound, incumbent } );
         continue;
      }

      double node_bound = std::max( lp.objective, node.bound );
      if( relative_gap( incumbent, node_bound ) <= opt.rel_gap || node_bound >= incumbent )
      {
         out.trace.push_back( { global_bound, incumbent } );
         continue;
      }

      int j = pick_branch( lp.x );
      auto basis = std::make_shared<const Basis>( std::move( lp.basis ) );
      if( j < 0 )
      {
         LpSolution fixed;
         bool all_fixed = std::all_of( binaries.begin(), binaries.end(), [&]( int b ) {
            return lo[static_cast<std::size_t>( b )] == hi[static_cast<std::size_t>( b )];
         } );
         if( all_fixed )
         {
            for( int b : binaries )
               lp.x[static_cast<std::size_t>( b )] = lo[static_cast<std::size_t>( b )];
            offer( lp );
         }
         else if( detail::polish( engine, binaries, lo, hi, lp.x, basis.get(), fixed ) )
         {
            out.lp_iterations += fixed.iterations;
            offer( fixed );
         }
         out.trace.push_back( { global_bound, incumbent } );
         continue;
      }

      if( opt.rounding_heuristic && ( node.id == 0 || out.nodes % opt.heuristic_frequency == 0 ) )
         try_rounding( lo, hi, lp.x, basis.get() );

      for( double v : { 0.0, 1.0 } )
      {
         auto fx = node.fixings;
         fx.push_back( { j, v } );
         open.push( { next_id++, node_bound, std::move( fx ), basis } );
      }
      out.trace.push_back( { global_bound, incumbent } );
   }

   if( open.empty() )
      global_bound = std::max( global_bound, incumbent );
   else
      global_bound = std::max( global_bound, std::min( open.top().bound, incumbent ) );

   if( !out.has_incumbent() )
   {
      if( limit_status == MipStatus::optimal )
      {
         out.status = MipStatus::infeasible;
         return out;
      }
      throw NoFeasibleFound( fmt::format( "no feasible solution after {} nodes ({})", out.nodes,
                                          to_string( limit_status ) ) );
   }
   out.status = limit_status;
   out.objective = incumbent;
   out.bound = std::min( global_bound, incumbent );
   out.gap = relative_gap( incumbent, out.bound );
   out.trace.push_back( { out.bound, incumbent } );
   return out;
}

/// Solves one LP per assignment of the binaries and keeps the best.
inline MipSolution enumerate_solve( const MilpModel& model, const LpOptions& lp_opt = {} )
{
   model.require_valid();
   const auto binaries = model.binary_indices();
   if( binaries.size() > 20 )
      throw TooManyBinaries( fmt::format( "enumerate_solve: {} binaries exceed the limit of 20", binaries.size() ) );

   LpEngine engine( model, lp_opt );
   MipSolution out;
   auto lo = engine.lower();
   auto hi = engine.upper();
   const std::uint64_t count = std::uint64_t{ 1 } << binaries.size();
   Basis last;
   bool unbounded = false;
   for( std::uint64_t mask = 0; mask < count; ++mask )
   {
      for( std::size_t k = 0; k < binaries.size(); ++k )
      {
         double v = ( mask >> k ) & 1u ? 1.0 : 0.0;
         auto j = static_cast<std::size_t>( binaries[k] );
         lo[j] = std::max( v, engine.lower()[j] );
         hi[j] = std::min( v, engine.upper()[j] );
      }
      auto s = engine.solve( lo, hi, last.empty() ? nullptr : &last );
      ++out.nodes;
      out.lp_iterations += s.iterations;
      if( s.status == LpStatus::unbounded )
         unbounded = true;
      if( s.status != LpStatus::optimal )
         continue;
      last = s.basis;
      if( s.objective < out.objective )
      {
         out.objective = s.objective;
         for( int j : binaries )
            s.x[static_cast<std::size_t>( j )] = lo[static_cast<std::size_t>( j )];
         out.values = std::move( s.x );
      }
   }
   if( unbounded )
   {
      out.status = MipStatus::unbounded;
      out.values.clear();
      out.objective = -kInf;
      return out;
   }
   if( !out.has_incumbent() )
   {
      out.status = MipStatus::infeasible;
      return out;
   }
   out.status = MipStatus::optimal;
   out.bound = out.objective;
   out.gap = 0.0;
   return out;
}

} // namespace sded::milp
