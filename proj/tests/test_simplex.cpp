#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sded/milp/simplex.hpp"

using namespace sded::milp;

namespace
{

/// Checks primal feasibility, dual sign conditions and a zero duality gap.
void expect_kkt( const MilpModel& m, const LpSolution& s, double tol = 1e-6 )
{
   ASSERT_EQ( s.status, LpStatus::optimal );
   double scale = 1.0 + std::abs( s.objective );
   EXPECT_LE( m.max_violation( s.x ), tol * scale );
   for( int i = 0; i < m.num_constraints(); ++i )
   {
      double y = s.duals[static_cast<std::size_t>( i )];
      const auto& r = m.constraint( i );
      if( r.sense == Sense::le )
      {
         EXPECT_LE( y, tol * scale ) << r.name;
      }
      if( r.sense == Sense::ge )
      {
         EXPECT_GE( y, -tol * scale ) << r.name;
      }
   }
   for( int j = 0; j < m.num_variables(); ++j )
   {
      double d = s.reduced_costs[static_cast<std::size_t>( j )];
      const auto& v = m.variable( j );
      if( d > tol * scale )
      {
         EXPECT_TRUE( std::isfinite( v.lower ) ) << v.name;
      }
      if( d < -tol * scale )
      {
         EXPECT_TRUE( std::isfinite( v.upper ) ) << v.name;
      }
   }
   EXPECT_NEAR( dual_objective( m, s ), s.objective, 1e-7 * scale );
}

MilpModel random_feasible_lp( std::mt19937_64& gen, int rows, int cols )
{
   std::uniform_real_distribution<double> u( -1.0, 1.0 );
   std::uniform_int_distribution<int> pick( 0, 9 );
   MilpModel m;
   std::vector<double> x0( static_cast<std::size_t>( cols ) );
   for( int j = 0; j < cols; ++j )
   {
      int kind = pick( gen );
      double lo = 0.0, hi = kInf, c = 1.0 + 5.0 * std::abs( u( gen ) );
      if( kind < 4 )
      {
         lo = -10.0 * std::abs( u( gen ) );
         hi = lo + 20.0 * std::abs( u( gen ) );
         c = 10.0 * u( gen );
      }
      else if( kind < 6 )
      {
         lo = 0.0;
         hi = lo;
         c = u( gen );
      }
      x0[static_cast<std::size_t>( j )] = std::isfinite( hi ) ? lo + ( hi - lo ) * 0.5 : lo + std::abs( u( gen ) );
      m.add_variable( "x" + std::to_string( j ), lo, hi, c );
   }
   for( int i = 0; i < rows; ++i )
   {
      std::vector<int> idx;
      std::vector<double> val;
      double act = 0.0;
      for( int j = 0; j < cols; ++j )
         if( pick( gen ) < 3 )
         {
            double a = std::round( u( gen ) * 100.0 ) / 10.0;
            if( a == 0.0 )
               continue;
            idx.push_back( j );
            val.push_back( a );
            act += a * x0[static_cast<std::size_t>( j )];
         }
      int s = pick( gen );
      if( s < 3 )
         m.add_constraint( "r" + std::to_string( i ), idx, val, Sense::eq, act );
      else if( s < 6 )
         m.add_constraint( "r" + std::to_string( i ), idx, val, Sense::le, act + std::abs( u( gen ) ) );
      else
         m.add_constraint( "r" + std::to_string( i ), idx, val, Sense::ge, act - std::abs( u( gen ) ) );
   }
   return m;
}

} // namespace

TEST( Simplex, SingleBoundedVariable )
{
   MilpModel m;
   int x = m.add_variable( "x", 0.0, 10.0, 1.0 );
   m.add_constraint( "c", { { x, 1.0 } }, Sense::ge, 1.0 );
   auto s = lp_relax_solve( m );
   ASSERT_EQ( s.status, LpStatus::optimal );
   EXPECT_NEAR( s.objective, 1.0, 1e-9 );
   EXPECT_NEAR( s.x[0], 1.0, 1e-9 );
   expect_kkt( m, s );
}

TEST( Simplex, ContradictoryBoundsAreInfeasible )
{
   MilpModel m;
   int x = m.add_variable( "x", -kInf, kInf, 1.0 );
   m.add_constraint( "lo", { { x, 1.0 } }, Sense::ge, 2.0 );
   m.add_constraint( "hi", { { x, 1.0 } }, Sense::le, 1.0 );
   EXPECT_EQ( lp_relax_solve( m ).status, LpStatus::infeasible );
}

TEST( Simplex, InfeasibleSystem )
{
   MilpModel m;
   int x = m.add_variable( "x", 0.0, kInf, 1.0 );
   int y = m.add_variable( "y", 0.0, kInf, 1.0 );
   m.add_constraint( "a", { { x, 1.0 }, { y, 1.0 } }, Sense::le, 1.0 );
   m.add_constraint( "b", { { x, 1.0 }, { y, 2.0 } }, Sense::ge, 3.0 );
   EXPECT_EQ( lp_relax_solve( m ).status, LpStatus::infeasible );
}

TEST( Simplex, UnboundedRay )
{
   MilpModel m;
   int x = m.add_variable( "x", 0.0, kInf, -1.0 );
   int y = m.add_variable( "y", 0.0, kInf, 0.0 );
   m.add_constraint( "a", { { x, 1.0 }, { y, -1.0 } }, Sense::le, 1.0 );
   EXPECT_EQ( lp_relax_solve( m ).status, LpStatus::unbounded );
}

TEST( Simplex, FreeVariablesAndEqualities )
{
   // min |a - 3| style: t >= a - 3, t >= 3 - a, a = b + 1, b free
   MilpModel m;
   int a = m.add_variable( "a", -kInf, kInf, 0.0 );
   int b = m.add_variable( "b", -kInf, kInf, 0.0 );
   int t = m.add_variable( "t", -kInf, kInf, 1.0 );
   m.add_constraint( "p", { { t, 1.0 }, { a, -1.0 } }, Sense::ge, -3.0 );
   m.add_constraint( "q", { { t, 1.0 }, { a, 1.0 } }, Sense::ge, 3.0 );
   m.add_constraint( "e", { { a, 1.0 }, { b, -1.0 } }, Sense::eq, 1.0 );
   m.add_constraint( "bl", { { b, 1.0 } }, Sense::le, 0.5 );
   auto s = lp_relax_solve( m );
   ASSERT_EQ( s.status, LpStatus::optimal );
   EXPECT_NEAR( s.objective, 1.5, 1e-9 );
   EXPECT_NEAR( s.x[static_cast<std::size_t>( a )], 1.5, 1e-9 );
   expect_kkt( m, s );
}

TEST( Simplex, DegenerateProblemTerminates )
{
   // Many redundant constraints through the same vertex.
   MilpModel m;
   const int n = 6;
   for( int j = 0; j < n; ++j )
      m.add_variable( "x" + std::to_string( j ), 0.0, kInf, -1.0 - 0.1 * j );
   for( int i = 0; i < 40; ++i )
   {
      std::vector<int> idx;
      std::vector<double> val;
      for( int j = 0; j < n; ++j )
      {
         idx.push_back( j );
         val.push_back( 1.0 + ( ( i * 7 + j * 3 ) % 5 ) );
      }
      m.add_constraint( "r" + std::to_string( i ), idx, val, Sense::le, 0.0 );
   }
   m.add_constraint( "cap", { { 0, 1.0 } }, Sense::le, 1.0 );
   auto s = lp_relax_solve( m );
   ASSERT_EQ( s.status, LpStatus::optimal );
   EXPECT_NEAR( s.objective, 0.0, 1e-9 );
   expect_kkt( m, s );
}

TEST( Simplex, RandomProblemsSatisfyOptimalityConditions )
{
   std::mt19937_64 gen( 12345 );
   int solved = 0;
   for( int trial = 0; trial < 300; ++trial )
   {
      int rows = 1 + static_cast<int>( gen() % 40 );
      int cols = 1 + static_cast<int>( gen() % 50 );
      auto m = random_feasible_lp( gen, rows, cols );
      auto s = lp_relax_solve( m );
      SCOPED_TRACE( trial );
      if( s.status == LpStatus::unbounded )
         continue;
      expect_kkt( m, s );
      ++solved;
   }
   EXPECT_GE( solved, 250 );
}

TEST( Simplex, WarmStartReproducesOptimum )
{
   std::mt19937_64 gen( 99 );
   auto m = random_feasible_lp( gen, 60, 80 );
   LpEngine engine( m );
   auto cold = engine.solve();
   ASSERT_EQ( cold.status, LpStatus::optimal );
   auto warm = engine.solve( &cold.basis );
   ASSERT_EQ( warm.status, LpStatus::optimal );
   EXPECT_NEAR( warm.objective, cold.objective, 1e-7 * ( 1.0 + std::abs( cold.objective ) ) );
   EXPECT_EQ( warm.iterations, 0 );

   // Tighten one bound and resolve from the old basis.
   auto lo = engine.lower();
   auto hi = engine.upper();
   for( std::size_t j = 0; j < lo.size(); ++j )
      if( std::isfinite( hi[j] ) && hi[j] > lo[j] )
      {
         hi[j] = lo[j] + 0.25 * ( hi[j] - lo[j] );
         break;
      }
   auto re = engine.solve( lo, hi, &cold.basis );
   MilpModel tight = m;
   for( std::size_t j = 0; j < lo.size(); ++j )
      tight.variable( static_cast<int>( j ) ).upper = hi[j];
   auto ref = lp_relax_solve( tight );
   ASSERT_EQ( re.status, ref.status );
   if( ref.status == LpStatus::optimal )
   {
      EXPECT_NEAR( re.objective, ref.objective, 1e-7 * ( 1.0 + std::abs( ref.objective ) ) );
   }
}

TEST( Simplex, WeakDualityOnSmallDispatch )
{
   // Two generators, one load, a line limit.
   MilpModel m;
   int g1 = m.add_variable( "g1", 0.0, 100.0, 20.0 );
   int g2 = m.add_variable( "g2", 10.0, 80.0, 35.0 );
   int f = m.add_variable( "f", -50.0, 50.0, 0.0 );
   m.add_constraint( "bal1", { { g1, 1.0 }, { f, -1.0 } }, Sense::eq, 30.0 );
   m.add_constraint( "bal2", { { g2, 1.0 }, { f, 1.0 } }, Sense::eq, 90.0 );
   auto s = lp_relax_solve( m );
   ASSERT_EQ( s.status, LpStatus::optimal );
   EXPECT_NEAR( s.objective, 20.0 * 80.0 + 35.0 * 40.0, 1e-7 );
   expect_kkt( m, s );
   EXPECT_NEAR( s.duals[1], 35.0, 1e-7 );
}
