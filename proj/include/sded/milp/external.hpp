#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/milp/branch_and_bound.hpp"
#include "sded/milp/mps.hpp"

namespace sded::milp
{

namespace detail
{

inline std::string shell_quote( const std::string& s )
{
   std::string out = "'";
   for( char c : s )
   {
      if( c == '\'' )
         out += "'\\''";
      else
         out += c;
   }
   return out + "'";
}

class TempDir
{
 public:
   TempDir()
   {
      auto tmpl = ( std::filesystem::temp_directory_path() / "sded-XXXXXX" ).string();
      if( !::mkdtemp( tmpl.data() ) )
         throw IoError( "cannot create a temporary directory" );
      path_ = tmpl;
   }
   ~TempDir()
   {
      std::error_code ec;
      std::filesystem::remove_all( path_, ec );
   }
   TempDir( const TempDir& ) = delete;
   TempDir& operator=( const TempDir& ) = delete;

   const std::filesystem::path& path() const { return path_; }

 private:
   std::filesystem::path path_;
};

} // namespace detail

/// Parses `objective <v>` followed by `var <name> <value>` lines.
///
/// Optional `status <word>` and `bound <v>` lines are also understood.
/// Names are MPS names; columns missing from the file are zero.
inline MipSolution parse_external_solution( std::istream& in, const MilpModel& model, const MpsNames& names )
{
   std::unordered_map<std::string, int> col_of;
   for( std::size_t j = 0; j < names.cols.size(); ++j )
      col_of.emplace( names.cols[j], static_cast<int>( j ) );

   MipSolution out;
   out.values.assign( static_cast<std::size_t>( model.num_variables() ), 0.0 );
   bool have_objective = false;
   bool have_bound = false;
   std::string status = "optimal";
   std::string line;
   int lineno = 0;
   while( std::getline( in, line ) )
   {
      ++lineno;
      std::istringstream ss( line );
      std::string key;
      if( !( ss >> key ) )
         continue;
      auto number = [&]( std::istringstream& s ) {
         std::string t;
         if( !( s >> t ) )
            throw BackendFailure( fmt::format( "solution line {}: missing value", lineno ) );
         try
         {
            return std::stod( t );
         }
         catch( const std::exception& )
         {
            throw BackendFailure( fmt::format( "solution line {}: '{}' is not a number", lineno, t ) );
         }
      };
      if( key == "objective" )
      {
         out.objective = number( ss );
         have_objective = true;
      }
      else if( key == "bound" )
      {
         out.bound = number( ss );
         have_bound = true;
      }
      else if( key == "status" )
         ss >> status;
      else if( key == "var" )
      {
         std::string name;
         ss >> name;
         auto it = col_of.find( name );
         if( it == col_of.end() )
            throw BackendFailure( fmt::format( "solution line {}: unknown column '{}'", lineno, name ) );
         out.values[static_cast<std::size_t>( it->second )] = number( ss );
      }
      else
         throw BackendFailure( fmt::format( "solution line {}: unexpected keyword '{}'", lineno, key ) );
   }
   if( status == "infeasible" )
   {
      out.status = MipStatus::infeasible;
      out.values.clear();
      return out;
   }
   if( status != "optimal" )
      throw BackendFailure( fmt::format( "backend reported status '{}'", status ) );
   if( !have_objective )
      throw BackendFailure( "solution file has no objective line" );
   out.status = MipStatus::optimal;
   if( !have_bound )
      out.bound = out.objective;
   out.gap = relative_gap( out.objective, out.bound );
   return out;
}

/// Writes the model to a scratch MPS file and runs `cmd <model.mps> <solution.out>`.
inline MipSolution solve_external( const MilpModel& model, const std::string& command )
{
   if( command.empty() )
      throw BackendFailure( "empty backend command" );
   detail::TempDir dir;
   auto mps = dir.path() / "model.mps";
   auto sol = dir.path() / "solution.out";
   auto names = write_mps( model, mps );
   auto cmd = fmt::format( "{} {} {}", command, detail::shell_quote( mps.string() ),
                           detail::shell_quote( sol.string() ) );
   int rc = std::system( cmd.c_str() );
   if( rc == -1 )
      throw BackendFailure( fmt::format( "cannot launch backend '{}'", command ) );
   if( !WIFEXITED( rc ) || WEXITSTATUS( rc ) != 0 )
      throw BackendFailure( fmt::format( "backend '{}' exited with status {}", command,
                                         WIFEXITED( rc ) ? WEXITSTATUS( rc ) : -1 ) );
   std::ifstream in( sol );
   if( !in )
      throw BackendFailure( fmt::format( "backend '{}' wrote no solution file", command ) );
   return parse_external_solution( in, model, names );
}

} // namespace sded::milp
