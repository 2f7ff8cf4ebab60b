#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"

#include "sded/milp/external.hpp"
#include "sded/milp/mps.hpp"

using namespace sded::milp;
namespace fs = std::filesystem;

namespace
{

fs::path scratch( const std::string& name )
{
   auto dir = fs::temp_directory_path() / fmt::format( "sded-mps-test-{}", ::getpid() );
   fs::create_directories( dir );
   return dir / name;
}

MilpModel random_model( std::mt19937_64& gen, bool long_names )
{
   std::uniform_real_distribution<double> u( -1.0, 1.0 );
   MilpModel m;
   m.name() = "random";
   int n = 3 + static_cast<int>( gen() % 12 );
   for( int j = 0; j < n; ++j )
   {
      auto name = long_names ? fmt::format( "variable.{}.t{}", j, j * 7 ) : fmt::format( "x{}", j );
      switch( gen() % 7 )
      {
      case 0:
         m.add_binary( name, u( gen ) );
         break;
      case 1:
         m.add_variable( name, -kInf, kInf, u( gen ) / 3.0 );
         break;
      case 2:
         m.add_variable( name, -kInf, 5.0 * u( gen ), 0.1 );
         break;
      case 3:
         m.add_variable( name, 2.5, 2.5, 1.0 / 3.0 );
         break;
      case 4:
         m.add_variable( name, -3.0, -1.0, 0.0 );
         break;
      default:
         m.add_variable( name, 0.0, kInf, std::abs( u( gen ) ) );
      }
   }
   int rows = 1 + static_cast<int>( gen() % 10 );
   for( int i = 0; i < rows; ++i )
   {
      std::vector<int> idx;
      std::vector<double> val;
      for( int j = n - 1; j >= 0; --j )
         if( gen() % 3 == 0 )
         {
            idx.push_back( j );
            val.push_back( u( gen ) * 1e3 / 7.0 );
         }
      auto sense = static_cast<Sense>( "LEG"[gen() % 3] );
      auto name = long_names ? fmt::format( "constraint_{}", i ) : fmt::format( "r{}", i );
      m.add_constraint( name, idx, val, sense, gen() % 4 == 0 ? 0.0 : u( gen ) * 10.0 );
   }
   m.set_objective_offset( gen() % 2 ? 0.0 : 12.125 + u( gen ) );
   return m;
}

} // namespace

TEST( Mps, MinimalModelRoundTrips )
{
   MilpModel m;
   m.name() = "tiny";
   int x = m.add_variable( "x", 0.0, kInf, 1.0 );
   m.add_constraint( "c1", { { x, 1.0 } }, Sense::ge, 1.0 );
   auto path = scratch( "tiny.mps" );
   auto names = write_mps( m, path );
   EXPECT_FALSE( names.mangled() );
   EXPECT_FALSE( fs::exists( mps_names_path( path ) ) );
   auto back = read_mps( path );
   EXPECT_EQ( back, m );
}

TEST( Mps, FixedFieldLayout )
{
   MilpModel m;
   int x = m.add_variable( "x", 0.0, 4.0, 2.0 );
   int b = m.add_binary( "b", -1.0 );
   m.add_constraint( "lim", { { x, 1.0 }, { b, -3.0 } }, Sense::le, 0.5 );
   std::ostringstream os;
   write_mps( m, os, mps_names( m ) );
   std::istringstream in( os.str() );
   std::string line;
   std::vector<std::string> lines;
   while( std::getline( in, line ) )
      lines.push_back( line );
   ASSERT_GE( lines.size(), 10u );
   EXPECT_EQ( lines[0], "NAME          model" );
   EXPECT_EQ( lines[1], "ROWS" );
   EXPECT_EQ( lines[2], " N  COST" );
   EXPECT_EQ( lines[3], " L  lim" );
   EXPECT_EQ( lines[4], "COLUMNS" );
   EXPECT_EQ( lines[5], "    x         COST                 2" );
   EXPECT_EQ( lines[6], "    x         lim                  1" );
   EXPECT_EQ( lines[7], "    MARKER0     'MARKER'                 'INTORG'" );
   EXPECT_EQ( lines[8].substr( 4, 8 ), "b       " );
   EXPECT_EQ( lines[8].substr( 14, 8 ), "COST    " );
   EXPECT_EQ( lines[8].substr( 24 ), "          -1" );
   EXPECT_EQ( os.str().substr( os.str().size() - 7 ), "ENDATA\n" );
   EXPECT_NE( os.str().find( " UP BND       x                    4\n" ), std::string::npos );
   EXPECT_NE( os.str().find( " BV BND       b                    1\n" ), std::string::npos );
}

TEST( Mps, LongNamesProduceDeterministicTable )
{
   std::mt19937_64 gen( 3 );
   auto m = random_model( gen, true );
   auto p1 = scratch( "long1.mps" );
   auto p2 = scratch( "long2.mps" );
   auto names = write_mps( m, p1 );
   write_mps( m, p2 );
   EXPECT_TRUE( names.rows_mangled );
   EXPECT_TRUE( names.cols_mangled );
   EXPECT_EQ( names.cols[0], "C0000000" );
   ASSERT_TRUE( fs::exists( mps_names_path( p1 ) ) );
   auto slurp = []( const fs::path& p ) {
      std::ifstream in( p );
      return std::string( std::istreambuf_iterator<char>( in ), {} );
   };
   EXPECT_EQ( slurp( mps_names_path( p1 ) ), slurp( mps_names_path( p2 ) ) );
   EXPECT_NE( slurp( mps_names_path( p1 ) ).find( "col C0000000 variable.0.t0" ), std::string::npos );
   auto back = read_mps( p1 );
   EXPECT_EQ( back, m.column_ordered() );
}

TEST( Mps, RandomModelsRoundTripExactly )
{
   std::mt19937_64 gen( 77 );
   for( int trial = 0; trial < 100; ++trial )
   {
      SCOPED_TRACE( trial );
      auto m = random_model( gen, trial % 2 == 1 );
      auto path = scratch( "rt.mps" );
      write_mps( m, path );
      auto back = read_mps( path );
      EXPECT_EQ( back, m.column_ordered() );
      auto a = lp_relax_solve( m );
      auto b = lp_relax_solve( back );
      ASSERT_EQ( a.status, b.status );
      if( a.status == LpStatus::optimal )
      {
         EXPECT_NEAR( a.objective, b.objective, 1e-9 * std::max( 1.0, std::abs( a.objective ) ) );
      }
   }
}

TEST( Mps, MalformedInputIsRejected )
{
   std::istringstream bad( "NAME x\nROWS\n N  COST\n Q  r1\nENDATA\n" );
   EXPECT_THROW( parse_mps( bad ), sded::ParseError );
   std::istringstream unterminated( "NAME x\nROWS\n N  COST\n" );
   EXPECT_THROW( parse_mps( unterminated ), sded::ParseError );
   std::istringstream unknown_row( "NAME x\nROWS\n N  COST\nCOLUMNS\n    x  r9  1\nENDATA\n" );
   EXPECT_THROW( parse_mps( unknown_row ), sded::ParseError );
   EXPECT_THROW( read_mps( scratch( "does-not-exist.mps" ) ), sded::IoError );
}

TEST( External, SolutionFileParsing )
{
   MilpModel m;
   m.add_variable( "x", 0.0, 1.0, 1.0 );
   m.add_variable( "y", 0.0, 1.0, 1.0 );
   auto names = mps_names( m );
   std::istringstream ok( "objective 1.5\nvar y 0.5\nvar x 1\n" );
   auto s = parse_external_solution( ok, m, names );
   EXPECT_EQ( s.status, MipStatus::optimal );
   EXPECT_DOUBLE_EQ( s.objective, 1.5 );
   EXPECT_DOUBLE_EQ( s.values[0], 1.0 );
   EXPECT_DOUBLE_EQ( s.values[1], 0.5 );
   std::istringstream missing( "var x 1\n" );
   EXPECT_THROW( parse_external_solution( missing, m, names ), sded::BackendFailure );
   std::istringstream garbage( "objective abc\n" );
   EXPECT_THROW( parse_external_solution( garbage, m, names ), sded::BackendFailure );
}

TEST( External, FailingCommandIsReported )
{
   MilpModel m;
   m.add_variable( "x", 0.0, 1.0, 1.0 );
   EXPECT_THROW( solve_external( m, "false" ), sded::BackendFailure );
   EXPECT_THROW( solve_external( m, "true" ), sded::BackendFailure );
}

TEST( External, BackendAgreesWithBranchAndBound )
{
   const std::string cmd = sded::fixtures::external_backend();
   if( cmd.empty() )
      GTEST_SKIP() << "no external backend configured";
   std::mt19937_64 gen( 11 );
   int compared = 0;
   for( int trial = 0; trial < 10; ++trial )
   {
      auto m = random_model( gen, trial % 2 == 0 );
      for( auto& v : m.variables() )
         if( !std::isfinite( v.lower ) || !std::isfinite( v.upper ) )
         {
            v.lower = std::max( v.lower, -50.0 );
            v.upper = std::min( v.upper, 50.0 );
         }
      auto ext = solve_external( m, cmd );
      auto in = branch_and_bound( m );
      ASSERT_EQ( ext.status == MipStatus::infeasible, in.status == MipStatus::infeasible );
      if( in.status != MipStatus::optimal )
         continue;
      EXPECT_NEAR( ext.objective, in.objective, 1e-6 * std::max( 1.0, std::abs( in.objective ) ) );
      ++compared;
   }
   EXPECT_GT( compared, 0 );
}
