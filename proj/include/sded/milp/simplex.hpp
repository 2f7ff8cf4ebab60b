#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/milp/basis_factor.hpp"
#include "sded/milp/model.hpp"
#include "sded/rng.hpp"

namespace sded::milp
{

enum class LpStatus
{
   optimal,
   infeasible,
   unbounded,
   iteration_limit,
   time_limit
};

inline const char* to_string( LpStatus s )
{
   switch( s )
   {
   case LpStatus::optimal:
      return "optimal";
   case LpStatus::infeasible:
      return "infeasible";
   case LpStatus::unbounded:
      return "unbounded";
   case LpStatus::iteration_limit:
      return "iteration_limit";
   case LpStatus::time_limit:
      return "time_limit";
   }
   return "unknown";
}

struct LpOptions
{
   double primal_tol = 1e-9;
   double dual_tol = 1e-9;
   double pivot_tol = 1e-7;
   int refactor_interval = 50;
   std::int64_t iteration_limit = 50'000'000;
   double time_limit_s = std::numeric_limits<double>::infinity();
   bool scaling = true;
   bool perturb_costs = true;
   /// Box used in place of infinite bounds; widened when it turns out to bind.
   double artificial_bound = 1e6;
   /// Iterations without objective progress before switching to Bland's rule.
   int stall_window = 1000;
};

/// Basis snapshot usable as a warm start for an LP with the same rows and columns.
struct Basis
{
   std::vector<int> head;           // basic variable per row (n + i is the logical of row i)
   std::vector<signed char> upper;  // per variable: nonbasic at upper bound

   bool empty() const { return head.empty(); }
};

struct LpSolution
{
   LpStatus status = LpStatus::infeasible;
   std::vector<double> x;             // structural values
   double objective = 0.0;
   std::vector<double> duals;         // one per row
   std::vector<double> reduced_costs; // one per structural column
   std::int64_t iterations = 0;
   double max_primal_residual = 0.0;
   Basis basis;
};

/// Dual simplex over a fixed constraint matrix; column bounds vary per call.
///
/// Internally the LP is  min c'x  s.t.  A x - s = 0,  l <= (x, s) <= u, where
/// s holds one logical per row carrying the row bounds. The matrix is scaled
/// by powers of two (geometric mean passes). Infinite bounds are replaced by
/// an artificial box, so every basis can be made dual feasible by moving
/// nonbasic variables to the appropriate bound; the box is widened when a
/// variable ends up resting on it with a nonzero reduced cost.
class LpEngine
{
 public:
   explicit LpEngine( const MilpModel& model, LpOptions options = {} ) : opt_( options )
   {
      m_ = model.num_constraints();
      n_ = model.num_variables();
      N_ = n_ + m_;
      offset_ = model.objective_offset();

      base_lower_.resize( static_cast<std::size_t>( n_ ) );
      base_upper_.resize( static_cast<std::size_t>( n_ ) );
      obj_.resize( static_cast<std::size_t>( n_ ) );
      for( int j = 0; j < n_; ++j )
      {
         const auto& v = model.variable( j );
         base_lower_[idx( j )] = v.lower;
         base_upper_[idx( j )] = v.upper;
         obj_[idx( j )] = v.objective;
      }
      row_lo_.resize( static_cast<std::size_t>( m_ ) );
      row_hi_.resize( static_cast<std::size_t>( m_ ) );
      for( int i = 0; i < m_; ++i )
      {
         const auto& r = model.constraint( i );
         row_lo_[idx( i )] = r.sense == Sense::le ? -kInf : r.rhs;
         row_hi_[idx( i )] = r.sense == Sense::ge ? kInf : r.rhs;
      }

      // Column-major copy, duplicates within a row merged.
      std::vector<int> count( static_cast<std::size_t>( n_ ) + 1, 0 );
      for( const auto& r : model.constraints() )
         for( int j : r.index )
            ++count[idx( j ) + 1];
      col_start_.assign( static_cast<std::size_t>( n_ ) + 1, 0 );
      for( int j = 0; j < n_; ++j )
         col_start_[idx( j ) + 1] = col_start_[idx( j )] + count[idx( j ) + 1];
      col_row_.resize( static_cast<std::size_t>( col_start_.back() ) );
      col_val_.resize( static_cast<std::size_t>( col_start_.back() ) );
      std::vector<int> fill( col_start_.begin(), col_start_.end() - 1 );
      for( int i = 0; i < m_; ++i )
      {
         const auto& r = model.constraint( i );
         for( std::size_t k = 0; k < r.index.size(); ++k )
         {
            int j = r.index[k];
            int p = fill[idx( j )];
            if( p > col_start_[idx( j )] && col_row_[idx( p - 1 )] == i )
            {
               col_val_[idx( p - 1 )] += r.coef[k];
               continue;
            }
            col_row_[idx( p )] = i;
            col_val_[idx( p )] = r.coef[k];
            ++fill[idx( j )];
         }
      }
      compact_columns( fill );
      compute_scaling();
      build_rows();
   }

   int num_rows() const { return m_; }
   int num_cols() const { return n_; }
   const std::vector<double>& lower() const { return base_lower_; }
   const std::vector<double>& upper() const { return base_upper_; }
   const LpOptions& options() const { return opt_; }
   LpOptions& options() { return opt_; }

   LpSolution solve( const Basis* warm = nullptr ) { return solve( base_lower_, base_upper_, warm ); }

   LpSolution solve( std::span<const double> lower, std::span<const double> upper, const Basis* warm = nullptr )
   {
      start_ = std::chrono::steady_clock::now();
      iterations_ = 0;
      LpSolution out;

      lo_.assign( idx( N_ ), 0.0 );
      up_.assign( idx( N_ ), 0.0 );
      art_.assign( idx( N_ ), 0 );
      for( int j = 0; j < n_; ++j )
      {
         if( lower[idx( j )] > upper[idx( j )] + 1e-12 )
         {
            out.status = LpStatus::infeasible;
            return out;
         }
         lo_[idx( j )] = lower[idx( j )] / cs_[idx( j )];
         up_[idx( j )] = upper[idx( j )] / cs_[idx( j )];
      }
      for( int i = 0; i < m_; ++i )
      {
         lo_[idx( n_ + i )] = row_lo_[idx( i )] * rs_[idx( i )];
         up_[idx( n_ + i )] = row_hi_[idx( i )] * rs_[idx( i )];
      }
      double box = opt_.artificial_bound;
      apply_artificial_bounds( box );

      cost_.assign( idx( N_ ), 0.0 );
      for( int j = 0; j < n_; ++j )
         cost_[idx( j )] = obj_[idx( j )] * cs_[idx( j )];

      // Starting basis
      head_.assign( idx( m_ ), 0 );
      pos_.assign( idx( N_ ), -1 );
      at_upper_.assign( idx( N_ ), 0 );
      bool warm_ok = warm && static_cast<int>( warm->head.size() ) == m_ &&
                     static_cast<int>( warm->upper.size() ) == N_;
      if( warm_ok )
      {
         head_ = warm->head;
         for( int j = 0; j < N_; ++j )
            at_upper_[idx( j )] = warm->upper[idx( j )];
      }
      else
         slack_basis_heads();
      for( int r = 0; r < m_; ++r )
         pos_[idx( head_[idx( r )] )] = r;
      if( !refactor() )
      {
         slack_basis_heads();
         std::fill( pos_.begin(), pos_.end(), -1 );
         for( int r = 0; r < m_; ++r )
            pos_[idx( head_[idx( r )] )] = r;
         if( !refactor() )
            throw NumericalFailure( "slack basis could not be factored" );
         warm_ok = false;
      }
      x_.assign( idx( N_ ), 0.0 );
      for( int j = 0; j < N_; ++j )
         if( pos_[idx( j )] < 0 )
         {
            if( !warm_ok )
               at_upper_[idx( j )] = cost_[idx( j )] < 0.0 ? 1 : 0;
            x_[idx( j )] = at_upper_[idx( j )] ? up_[idx( j )] : lo_[idx( j )];
         }
      compute_duals();
      fix_dual_infeasibilities();
      bool perturbed = false;
      if( opt_.perturb_costs )
         perturbed = perturb();
      compute_primal();
      weights_.assign( idx( m_ ), 1.0 );

      LpStatus status = iterate( box, perturbed );
      out.status = status;
      out.iterations = iterations_;
      if( status != LpStatus::optimal )
         return out;

      // Unscale.
      out.x.resize( idx( n_ ) );
      for( int j = 0; j < n_; ++j )
         out.x[idx( j )] = x_[idx( j )] * cs_[idx( j )];
      out.duals.resize( idx( m_ ) );
      for( int i = 0; i < m_; ++i )
         out.duals[idx( i )] = d_[idx( n_ + i )] * rs_[idx( i )];
      out.reduced_costs.resize( idx( n_ ) );
      for( int j = 0; j < n_; ++j )
         out.reduced_costs[idx( j )] = pos_[idx( j )] >= 0 ? 0.0 : d_[idx( j )] / cs_[idx( j )];
      out.objective = offset_;
      for( int j = 0; j < n_; ++j )
         out.objective += obj_[idx( j )] * out.x[idx( j )];
      out.max_primal_residual = primal_residual( out.x, lower, upper );
      out.basis.head = head_;
      out.basis.upper.assign( at_upper_.begin(), at_upper_.end() );
      return out;
   }

   /// Unscaled bound and row violation of a structural point.
   double primal_residual( std::span<const double> x, std::span<const double> lower,
                           std::span<const double> upper ) const
   {
      double worst = 0.0;
      for( int j = 0; j < n_; ++j )
      {
         worst = std::max( worst, lower[idx( j )] - x[idx( j )] );
         worst = std::max( worst, x[idx( j )] - upper[idx( j )] );
      }
      std::vector<double> act( idx( m_ ), 0.0 );
      for( int j = 0; j < n_; ++j )
         for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            act[idx( col_row_[idx( p )] )] +=
                col_val_[idx( p )] / ( rs_[idx( col_row_[idx( p )] )] * cs_[idx( j )] ) * x[idx( j )];
      for( int i = 0; i < m_; ++i )
      {
         worst = std::max( worst, row_lo_[idx( i )] - act[idx( i )] );
         worst = std::max( worst, act[idx( i )] - row_hi_[idx( i )] );
      }
      return worst;
   }

 private:
   static std::size_t idx( int i ) { return static_cast<std::size_t>( i ); }

   void compact_columns( const std::vector<int>& fill )
   {
      std::vector<int> start( idx( n_ ) + 1, 0 );
      std::vector<int> rows;
      std::vector<double> vals;
      rows.reserve( col_row_.size() );
      vals.reserve( col_val_.size() );
      for( int j = 0; j < n_; ++j )
      {
         for( int p = col_start_[idx( j )]; p < fill[idx( j )]; ++p )
            if( col_val_[idx( p )] != 0.0 )
            {
               rows.push_back( col_row_[idx( p )] );
               vals.push_back( col_val_[idx( p )] );
            }
         start[idx( j ) + 1] = static_cast<int>( rows.size() );
      }
      col_start_ = std::move( start );
      col_row_ = std::move( rows );
      col_val_ = std::move( vals );
   }

   void compute_scaling()
   {
      rs_.assign( idx( m_ ), 1.0 );
      cs_.assign( idx( n_ ), 1.0 );
      if( !opt_.scaling || col_val_.empty() )
         return;
      std::vector<double> rmin( idx( m_ ) ), rmax( idx( m_ ) );
      for( int pass = 0; pass < 8; ++pass )
      {
         std::fill( rmin.begin(), rmin.end(), kInf );
         std::fill( rmax.begin(), rmax.end(), 0.0 );
         for( int j = 0; j < n_; ++j )
            for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            {
               int i = col_row_[idx( p )];
               double a = std::abs( col_val_[idx( p )] ) * rs_[idx( i )] * cs_[idx( j )];
               rmin[idx( i )] = std::min( rmin[idx( i )], a );
               rmax[idx( i )] = std::max( rmax[idx( i )], a );
            }
         for( int i = 0; i < m_; ++i )
            if( rmax[idx( i )] > 0.0 )
               rs_[idx( i )] /= std::sqrt( rmin[idx( i )] * rmax[idx( i )] );
         for( int j = 0; j < n_; ++j )
         {
            double cmin = kInf, cmax = 0.0;
            for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            {
               double a = std::abs( col_val_[idx( p )] ) * rs_[idx( col_row_[idx( p )] )] * cs_[idx( j )];
               cmin = std::min( cmin, a );
               cmax = std::max( cmax, a );
            }
            if( cmax > 0.0 )
               cs_[idx( j )] /= std::sqrt( cmin * cmax );
         }
      }
      for( auto& s : rs_ )
         s = std::exp2( std::round( std::log2( s ) ) );
      for( auto& s : cs_ )
         s = std::exp2( std::round( std::log2( s ) ) );
      for( int j = 0; j < n_; ++j )
         for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            col_val_[idx( p )] *= rs_[idx( col_row_[idx( p )] )] * cs_[idx( j )];
   }

   void build_rows()
   {
      row_start_.assign( idx( m_ ) + 1, 0 );
      for( int r : col_row_ )
         ++row_start_[idx( r ) + 1];
      for( int i = 0; i < m_; ++i )
         row_start_[idx( i ) + 1] += row_start_[idx( i )];
      row_col_.resize( col_row_.size() );
      row_val_.resize( col_val_.size() );
      std::vector<int> fill( row_start_.begin(), row_start_.end() - 1 );
      for( int j = 0; j < n_; ++j )
         for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
         {
            int q = fill[idx( col_row_[idx( p )] )]++;
            row_col_[idx( q )] = j;
            row_val_[idx( q )] = col_val_[idx( p )];
         }
   }

   void apply_artificial_bounds( double box )
   {
      for( int j = 0; j < N_; ++j )
      {
         if( lo_[idx( j )] == -kInf || ( art_[idx( j )] & 1 ) )
         {
            lo_[idx( j )] = -box;
            art_[idx( j )] |= 1;
         }
         if( up_[idx( j )] == kInf || ( art_[idx( j )] & 2 ) )
         {
            up_[idx( j )] = box;
            art_[idx( j )] |= 2;
         }
      }
   }

   void slack_basis_heads()
   {
      for( int r = 0; r < m_; ++r )
         head_[idx( r )] = n_ + r;
   }

   bool refactor()
   {
      std::vector<int> bp( idx( m_ ) + 1, 0 );
      std::vector<int> bi;
      std::vector<double> bx;
      bi.reserve( idx( m_ ) * 3 );
      bx.reserve( idx( m_ ) * 3 );
      for( int r = 0; r < m_; ++r )
      {
         int j = head_[idx( r )];
         if( j < n_ )
         {
            for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            {
               bi.push_back( col_row_[idx( p )] );
               bx.push_back( col_val_[idx( p )] );
            }
         }
         else
         {
            bi.push_back( j - n_ );
            bx.push_back( -1.0 );
         }
         bp[idx( r ) + 1] = static_cast<int>( bi.size() );
      }
      return lu_.factor( m_, bp, bi, bx );
   }

   /// Replaces the basis by the slack basis after a failed refactorization.
   void recover_slack_basis()
   {
      for( int r = 0; r < m_; ++r )
         pos_[idx( head_[idx( r )] )] = -1;
      slack_basis_heads();
      for( int r = 0; r < m_; ++r )
         pos_[idx( head_[idx( r )] )] = r;
      for( int j = 0; j < n_; ++j )
         if( pos_[idx( j )] < 0 )
            x_[idx( j )] = at_upper_[idx( j )] ? up_[idx( j )] : lo_[idx( j )];
      if( !refactor() )
         throw NumericalFailure( "slack basis could not be factored" );
      weights_.assign( idx( m_ ), 1.0 );
   }

   void compute_primal()
   {
      std::vector<double> rhs( idx( m_ ), 0.0 );
      for( int j = 0; j < n_; ++j )
      {
         if( pos_[idx( j )] >= 0 )
            continue;
         double v = x_[idx( j )];
         if( v == 0.0 )
            continue;
         for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            rhs[idx( col_row_[idx( p )] )] -= col_val_[idx( p )] * v;
      }
      for( int i = 0; i < m_; ++i )
         if( pos_[idx( n_ + i )] < 0 )
            rhs[idx( i )] += x_[idx( n_ + i )];
      lu_.ftran( rhs );
      for( int r = 0; r < m_; ++r )
         x_[idx( head_[idx( r )] )] = rhs[idx( r )];
   }

   void compute_duals()
   {
      std::vector<double> y( idx( m_ ) );
      for( int r = 0; r < m_; ++r )
         y[idx( r )] = cost_[idx( head_[idx( r )] )];
      lu_.btran( y );
      d_.assign( idx( N_ ), 0.0 );
      for( int j = 0; j < n_; ++j )
      {
         if( pos_[idx( j )] >= 0 )
            continue;
         double s = cost_[idx( j )];
         for( int p = col_start_[idx( j )]; p < col_start_[idx( j ) + 1]; ++p )
            s -= col_val_[idx( p )] * y[idx( col_row_[idx( p )] )];
         d_[idx( j )] = s;
      }
      for( int i = 0; i < m_; ++i )
         if( pos_[idx( n_ + i )] < 0 )
            d_[idx( n_ + i )] = cost_[idx( n_ + i )] + y[idx( i )];
   }

   bool is_fixed( int j ) const { return lo_[idx( j )] == up_[idx( j )]; }

   /// Moves nonbasic variables to the bound matching their reduced-cost sign.
   bool fix_dual_infeasibilities()
   {
      bool changed = false;
      for( int j = 0; j < N_; ++j )
      {
         if( pos_[idx( j )] >= 0 || is_fixed( j ) )
            continue;
         double dj = d_[idx( j )];
         if( !at_upper_[idx( j )] && dj < -opt_.dual_tol )
         {
            at_upper_[idx( j )] = 1;
            x_[idx( j )] = up_[idx( j )];
            changed = true;
         }
         else if( at_upper_[idx( j )] && dj > opt_.dual_tol )
         {
            at_upper_[idx( j )] = 0;
            x_[idx( j )] = lo_[idx( j )];
            changed = true;
         }
      }
      return changed;
   }

   /// Shifts costs of nonbasic columns away from zero reduced cost.
   bool perturb()
   {
      double cmax = 0.0;
      for( int j = 0; j < n_; ++j )
         cmax = std::max( cmax, std::abs( cost_[idx( j )] ) );
      double base = 5e-7 * std::max( 1.0, cmax );
      CounterRng rng( 0x5eed, { n_, m_ } );
      bool any = false;
      for( int j = 0; j < n_; ++j )
      {
         double u = rng.uniform();
         if( pos_[idx( j )] >= 0 || is_fixed( j ) )
            continue;
         double xi = ( base * 1e-2 + 1e-5 * std::abs( cost_[idx( j )] ) ) * ( 1.0 + u );
         double s = at_upper_[idx( j )] ? -xi : xi;
         cost_[idx( j )] += s;
         d_[idx( j )] += s;
         any = true;
      }
      return any;
   }

   double current_objective() const
   {
      double v = 0.0;
      for( int j = 0; j < n_; ++j )
         v += cost_[idx( j )] * x_[idx( j )];
      return v;
   }

   double infeasibility( int j ) const
   {
      double v = x_[idx( j )];
      if( v < lo_[idx( j )] - opt_.primal_tol )
         return lo_[idx( j )] - v;
      if( v > up_[idx( j )] + opt_.primal_tol )
         return v - up_[idx( j )];
      return 0.0;
   }

   int choose_leaving_row( bool bland ) const
   {
      int best = -1;
      double best_score = 0.0;
      int best_var = std::numeric_limits<int>::max();
      for( int r = 0; r < m_; ++r )
      {
         int j = head_[idx( r )];
         double inf = infeasibility( j );
         if( inf <= 0.0 )
            continue;
         if( bland )
         {
            if( j < best_var )
            {
               best_var = j;
               best = r;
            }
         }
         else
         {
            double score = inf * inf / weights_[idx( r )];
            if( score > best_score )
            {
               best_score = score;
               best = r;
            }
         }
      }
      return best;
   }

   bool time_up() const
   {
      if( !std::isfinite( opt_.time_limit_s ) )
         return false;
      std::chrono::duration<double> el = std::chrono::steady_clock::now() - start_;
      return el.count() > opt_.time_limit_s;
   }

   /// Restores original costs; returns true when the basis stays dual feasible.
   bool remove_perturbation()
   {
      for( int j = 0; j < n_; ++j )
         cost_[idx( j )] = obj_[idx( j )] * cs_[idx( j )];
      compute_duals();
      if( fix_dual_infeasibilities() )
      {
         compute_primal();
         return false;
      }
      return true;
   }

   LpStatus iterate( double& box, bool perturbed )
   {
      std::vector<double> rho( idx( m_ ) ), alpha_col( idx( m_ ) ), tau( idx( m_ ) );
      std::vector<double> alpha_row( idx( N_ ), 0.0 );
      std::vector<int> touched;
      touched.reserve( 1024 );

      bool bland = false;
      int bland_episodes = 0;
      double last_obj = -kInf;
      int stalled = 0;
      int failed_pivots = 0;

      for( ;; )
      {
         if( iterations_ >= opt_.iteration_limit )
            return LpStatus::iteration_limit;
         if( ( iterations_ & 63 ) == 0 && time_up() )
            return LpStatus::time_limit;

         if( lu_.eta_count() >= opt_.refactor_interval )
         {
            if( !refactor() )
               recover_slack_basis();
            compute_duals();
            fix_dual_infeasibilities();
            compute_primal();
         }

         if( iterations_ % 100 == 0 )
         {
            double obj = current_objective();
            if( obj > last_obj + 1e-11 * ( 1.0 + std::abs( obj ) ) )
            {
               last_obj = obj;
               stalled = 0;
               if( bland && bland_episodes < 3 )
                  bland = false;
            }
            else if( ( stalled += 100 ) >= opt_.stall_window && !bland )
            {
               bland = true;
               ++bland_episodes;
               stalled = 0;
            }
         }

         int r = choose_leaving_row( bland );
         if( r < 0 )
         {
            if( lu_.eta_count() > 0 )
            {
               if( !refactor() )
                  recover_slack_basis();
               compute_duals();
               fix_dual_infeasibilities();
               compute_primal();
               if( choose_leaving_row( bland ) >= 0 )
                  continue;
            }
            if( perturbed )
            {
               perturbed = false;
               if( !remove_perturbation() )
                  continue;
            }
            // An artificial bound that binds with a nonzero reduced cost is widened.
            bool widened = false;
            for( int j = 0; j < N_; ++j )
            {
               if( pos_[idx( j )] >= 0 || art_[idx( j )] == 0 )
                  continue;
               bool on_art = ( at_upper_[idx( j )] && ( art_[idx( j )] & 2 ) ) ||
                             ( !at_upper_[idx( j )] && ( art_[idx( j )] & 1 ) );
               if( on_art && std::abs( d_[idx( j )] ) > opt_.dual_tol )
                  widened = true;
            }
            if( widened )
            {
               if( box >= 1e12 )
                  return LpStatus::unbounded;
               box *= 1e3;
               apply_artificial_bounds( box );
               for( int j = 0; j < N_; ++j )
                  if( pos_[idx( j )] < 0 )
                     x_[idx( j )] = at_upper_[idx( j )] ? up_[idx( j )] : lo_[idx( j )];
               compute_primal();
               continue;
            }
            return LpStatus::optimal;
         }

         const int p = head_[idx( r )];
         const bool to_upper = x_[idx( p )] > up_[idx( p )];
         const double target = to_upper ? up_[idx( p )] : lo_[idx( p )];
         const double dir = to_upper ? 1.0 : -1.0;

         // rho = row r of B^-1
         std::fill( rho.begin(), rho.end(), 0.0 );
         rho[idx( r )] = 1.0;
         lu_.btran( rho );

         // alpha_row = rho' [A -I] over nonbasic columns
         touched.clear();
         for( int i = 0; i < m_; ++i )
         {
            double ri = rho[idx( i )];
            if( ri == 0.0 )
               continue;
            for( int k = row_start_[idx( i )]; k < row_start_[idx( i ) + 1]; ++k )
            {
               int j = row_col_[idx( k )];
               if( pos_[idx( j )] >= 0 )
                  continue;
               if( alpha_row[idx( j )] == 0.0 )
                  touched.push_back( j );
               alpha_row[idx( j )] += ri * row_val_[idx( k )];
               if( alpha_row[idx( j )] == 0.0 )
                  alpha_row[idx( j )] = 1e-300;
            }
            int s = n_ + i;
            if( pos_[idx( s )] < 0 )
            {
               if( alpha_row[idx( s )] == 0.0 )
                  touched.push_back( s );
               alpha_row[idx( s )] -= ri;
            }
         }

         int q = ratio_test( touched, alpha_row, dir, bland );
         if( q < 0 )
         {
            for( int j : touched )
               alpha_row[idx( j )] = 0.0;
            if( lu_.eta_count() > 0 )
            {
               if( !refactor() )
                  recover_slack_basis();
               compute_duals();
               fix_dual_infeasibilities();
               compute_primal();
               continue;
            }
            return LpStatus::infeasible;
         }

         // alpha_col = B^-1 a_q
         std::fill( alpha_col.begin(), alpha_col.end(), 0.0 );
         if( q < n_ )
         {
            for( int k = col_start_[idx( q )]; k < col_start_[idx( q ) + 1]; ++k )
               alpha_col[idx( col_row_[idx( k )] )] = col_val_[idx( k )];
         }
         else
            alpha_col[idx( q - n_ )] = -1.0;
         lu_.ftran( alpha_col );

         const double pivot_row = alpha_row[idx( q )];
         const double pivot = alpha_col[idx( r )];
         if( std::abs( pivot - pivot_row ) > 1e-8 * ( 1.0 + std::abs( pivot ) ) || std::abs( pivot ) < 1e-11 )
         {
            for( int j : touched )
               alpha_row[idx( j )] = 0.0;
            if( lu_.eta_count() > 0 )
            {
               if( !refactor() )
                  recover_slack_basis();
               compute_duals();
               fix_dual_infeasibilities();
               compute_primal();
               continue;
            }
            if( std::abs( pivot ) < 1e-11 && ++failed_pivots > 5 )
               throw NumericalFailure( fmt::format( "pivot {} below tolerance in row {}", pivot, r ) );
         }

         // Dual update
         double theta_d = d_[idx( q )] / pivot_row;
         if( theta_d * dir < 0.0 )
            theta_d = 0.0;
         for( int j : touched )
         {
            if( j != q )
               d_[idx( j )] -= theta_d * alpha_row[idx( j )];
            alpha_row[idx( j )] = 0.0;
         }
         d_[idx( q )] = 0.0;
         d_[idx( p )] = -theta_d;

         // Primal update
         const double theta_p = ( x_[idx( p )] - target ) / pivot;
         for( int i = 0; i < m_; ++i )
         {
            double a = alpha_col[idx( i )];
            if( a != 0.0 )
               x_[idx( head_[idx( i )] )] -= theta_p * a;
         }
         x_[idx( q )] += theta_p;
         x_[idx( p )] = target;
         at_upper_[idx( p )] = to_upper ? 1 : 0;

         // Dual steepest-edge weights
         double wr = 0.0;
         for( double v : rho )
            wr += v * v;
         tau = rho;
         lu_.ftran( tau );
         for( int i = 0; i < m_; ++i )
         {
            if( i == r )
               continue;
            double a = alpha_col[idx( i )];
            if( a == 0.0 )
               continue;
            double ratio = a / pivot;
            double w = weights_[idx( i )] - 2.0 * ratio * tau[idx( i )] + ratio * ratio * wr;
            weights_[idx( i )] = std::max( w, std::max( 1e-4, ratio * ratio ) );
         }
         weights_[idx( r )] = std::max( wr / ( pivot * pivot ), 1e-4 );

         // Basis change
         pos_[idx( p )] = -1;
         pos_[idx( q )] = r;
         head_[idx( r )] = q;
         lu_.push_eta( r, alpha_col );
         ++iterations_;
      }
   }

   /// Harris two-pass ratio test; Bland mode takes the smallest index among ties.
   int ratio_test( const std::vector<int>& touched, const std::vector<double>& alpha_row, double dir,
                   bool bland ) const
   {
      const double tol = opt_.dual_tol;
      const double ptol = opt_.pivot_tol;
      double bound = kInf;
      for( int j : touched )
      {
         if( is_fixed( j ) )
            continue;
         double a = dir * alpha_row[idx( j )];
         double dj = d_[idx( j )];
         if( !at_upper_[idx( j )] && a > ptol )
            bound = std::min( bound, ( dj + ( bland ? 0.0 : tol ) ) / a );
         else if( at_upper_[idx( j )] && a < -ptol )
            bound = std::min( bound, ( dj - ( bland ? 0.0 : tol ) ) / a );
      }
      if( bound == kInf )
         return -1;
      int best = -1;
      double best_abs = 0.0;
      for( int j : touched )
      {
         if( is_fixed( j ) )
            continue;
         double a = dir * alpha_row[idx( j )];
         double dj = d_[idx( j )];
         bool cand = ( !at_upper_[idx( j )] && a > ptol ) || ( at_upper_[idx( j )] && a < -ptol );
         if( !cand )
            continue;
         double ratio = dj / a;
         if( bland )
         {
            if( ratio <= bound + 1e-12 && ( best < 0 || j < best ) )
               best = j;
         }
         else if( ratio <= bound && std::abs( a ) > best_abs )
         {
            best_abs = std::abs( a );
            best = j;
         }
      }
      return best;
   }

   LpOptions opt_;
   int m_ = 0, n_ = 0, N_ = 0;
   double offset_ = 0.0;
   std::vector<double> base_lower_, base_upper_, obj_;
   std::vector<double> row_lo_, row_hi_;
   std::vector<int> col_start_, col_row_;
   std::vector<double> col_val_;
   std::vector<int> row_start_, row_col_;
   std::vector<double> row_val_;
   std::vector<double> rs_, cs_;

   // Per-solve state (scaled space).
   std::vector<double> lo_, up_, cost_, x_, d_, weights_;
   std::vector<signed char> art_, at_upper_;
   std::vector<int> head_, pos_;
   BasisFactor lu_;
   std::int64_t iterations_ = 0;
   std::chrono::steady_clock::time_point start_;
};

/// Solves the continuous relaxation (binaries relaxed to their bounds).
inline LpSolution lp_relax_solve( const MilpModel& model, const LpOptions& options = {} )
{
   model.require_valid();
   LpEngine engine( model, options );
   return engine.solve();
}

/// Dual objective from row duals and reduced costs (weak-duality check).
inline double dual_objective( const MilpModel& model, const LpSolution& sol )
{
   double v = model.objective_offset();
   for( int i = 0; i < model.num_constraints(); ++i )
   {
      double y = sol.duals[static_cast<std::size_t>( i )];
      v += y * model.constraint( i ).rhs;
   }
   for( int j = 0; j < model.num_variables(); ++j )
   {
      double dj = sol.reduced_costs[static_cast<std::size_t>( j )];
      if( dj == 0.0 )
         continue;
      const auto& var = model.variable( j );
      double b = dj > 0.0 ? var.lower : var.upper;
      if( std::isfinite( b ) )
         v += dj * b;
   }
   return v;
}

} // namespace sded::milp
