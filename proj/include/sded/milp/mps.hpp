#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"
#include "sded/milp/model.hpp"

namespace sded::milp
{

/// Short (at most 8 character) names used in an MPS file.
///
/// If any row name is unusable in fixed format (too long, contains blanks,
/// duplicated, or equal to the objective row name) every row is renamed
/// R0000000, R0000001, ...; columns likewise become C0000000, ... The table
/// maps each short name back to the model name.
struct MpsNames
{
   std::string objective = "COST";
   std::vector<std::string> rows;
   std::vector<std::string> cols;
   bool rows_mangled = false;
   bool cols_mangled = false;

   bool mangled() const { return rows_mangled || cols_mangled; }
};

namespace detail
{

inline bool mps_name_ok( const std::string& s )
{
   return !s.empty() && s.size() <= 8 && s.find_first_of( " \t\r\n" ) == std::string::npos && s[0] != '$' &&
          s[0] != '*';
}

inline std::string mps_number( double v )
{
   if( v == kInf )
      return "1e+30";
   if( v == -kInf )
      return "-1e+30";
   return fmt::format( "{}", v );
}

inline double mps_parse_number( const std::string& s, int line )
{
   try
   {
      std::size_t used = 0;
      double v = std::stod( s, &used );
      if( used != s.size() )
         throw ParseError( "" );
      if( v >= 1e30 )
         return kInf;
      if( v <= -1e30 )
         return -kInf;
      return v;
   }
   catch( const std::exception& )
   {
      throw ParseError( fmt::format( "MPS line {}: '{}' is not a number", line, s ) );
   }
}

inline std::string pad( const std::string& s, std::size_t w )
{
   return s.size() >= w ? s : s + std::string( w - s.size(), ' ' );
}

inline std::string field_line( const std::string& code, const std::string& f1, const std::string& f2,
                               const std::string& num )
{
   // Columns: code 2-3, name 5-12, name 15-22, number 25-36 (right aligned).
   std::string line = " " + pad( code, 2 ) + " " + pad( f1, 8 ) + "  " + pad( f2, 8 ) + "  ";
   if( num.size() < 12 )
      line += std::string( 12 - num.size(), ' ' );
   line += num;
   while( !line.empty() && line.back() == ' ' )
      line.pop_back();
   return line;
}

} // namespace detail

inline MpsNames mps_names( const MilpModel& model )
{
   MpsNames out;
   auto assign = [&]( auto count, auto name_of, std::vector<std::string>& dst, bool& mangled, char prefix ) {
      std::unordered_map<std::string, int> seen;
      bool ok = true;
      for( int i = 0; i < count; ++i )
      {
         const std::string& s = name_of( i );
         if( !detail::mps_name_ok( s ) || s == out.objective || !seen.emplace( s, i ).second )
         {
            ok = false;
            break;
         }
      }
      dst.resize( static_cast<std::size_t>( count ) );
      for( int i = 0; i < count; ++i )
         dst[static_cast<std::size_t>( i )] = ok ? name_of( i ) : fmt::format( "{}{:07d}", prefix, i );
      mangled = !ok;
   };
   assign(
       model.num_constraints(), [&]( int i ) -> const std::string& { return model.constraint( i ).name; },
       out.rows, out.rows_mangled, 'R' );
   assign(
       model.num_variables(), [&]( int j ) -> const std::string& { return model.variable( j ).name; }, out.cols,
       out.cols_mangled, 'C' );
   if( model.num_variables() > 10'000'000 || model.num_constraints() > 10'000'000 )
      throw Error( "model too large for 8-character MPS names" );
   return out;
}

/// Writes the model in fixed-format MPS. Numbers are printed in shortest
/// round-trip form, so a value wider than 12 characters overruns its field;
/// the in-tree reader splits on blanks and accepts that.
inline void write_mps( const MilpModel& model, std::ostream& os, const MpsNames& names )
{
   os << "NAME          " << model.name() << "\n";
   os << "ROWS\n";
   os << " N  " << names.objective << "\n";
   for( int i = 0; i < model.num_constraints(); ++i )
      os << " " << static_cast<char>( model.constraint( i ).sense ) << "  " << names.rows[static_cast<std::size_t>( i )]
         << "\n";

   // Column-wise entries in row order.
   std::vector<std::vector<std::pair<int, double>>> cols( static_cast<std::size_t>( model.num_variables() ) );
   for( int i = 0; i < model.num_constraints(); ++i )
   {
      const auto& r = model.constraint( i );
      for( std::size_t k = 0; k < r.index.size(); ++k )
         cols[static_cast<std::size_t>( r.index[k] )].emplace_back( i, r.coef[k] );
   }

   os << "COLUMNS\n";
   bool in_int = false;
   int marker = 0;
   for( int j = 0; j < model.num_variables(); ++j )
   {
      const auto& v = model.variable( j );
      if( v.is_binary != in_int )
      {
         os << fmt::format( "    MARKER{:<4}  'MARKER'                 {}\n", marker++,
                            v.is_binary ? "'INTORG'" : "'INTEND'" );
         in_int = v.is_binary;
      }
      const auto& cn = names.cols[static_cast<std::size_t>( j )];
      if( v.objective != 0.0 || cols[static_cast<std::size_t>( j )].empty() )
         os << detail::field_line( "", cn, names.objective, detail::mps_number( v.objective ) ) << "\n";
      for( const auto& [i, a] : cols[static_cast<std::size_t>( j )] )
         os << detail::field_line( "", cn, names.rows[static_cast<std::size_t>( i )], detail::mps_number( a ) )
            << "\n";
   }
   if( in_int )
      os << fmt::format( "    MARKER{:<4}  'MARKER'                 'INTEND'\n", marker++ );

   os << "RHS\n";
   if( model.objective_offset() != 0.0 )
      os << detail::field_line( "", "RHS", names.objective, detail::mps_number( -model.objective_offset() ) )
         << "\n";
   for( int i = 0; i < model.num_constraints(); ++i )
      if( model.constraint( i ).rhs != 0.0 )
         os << detail::field_line( "", "RHS", names.rows[static_cast<std::size_t>( i )],
                                   detail::mps_number( model.constraint( i ).rhs ) )
            << "\n";

   os << "BOUNDS\n";
   for( int j = 0; j < model.num_variables(); ++j )
   {
      const auto& v = model.variable( j );
      const auto& cn = names.cols[static_cast<std::size_t>( j )];
      auto put = [&]( const char* code, double val ) {
         os << detail::field_line( code, "BND", cn, detail::mps_number( val ) ) << "\n";
      };
      if( v.is_binary && v.lower == 0.0 && v.upper == 1.0 )
      {
         put( "BV", 1.0 );
         continue;
      }
      if( v.lower == v.upper )
      {
         put( "FX", v.lower );
         continue;
      }
      if( v.lower == -kInf && v.upper == kInf )
      {
         os << detail::field_line( "FR", "BND", cn, "" ) << "\n";
         continue;
      }
      if( v.lower == -kInf )
         os << detail::field_line( "MI", "BND", cn, "" ) << "\n";
      else if( v.lower != 0.0 || v.is_binary || v.upper < 0.0 )
         put( "LO", v.lower );
      if( v.upper != kInf || v.is_binary )
         put( "UP", v.upper );
   }
   os << "ENDATA\n";
}

inline void write_mps_names( const MpsNames& names, const MilpModel& model, std::ostream& os )
{
   os << "# short-name original-name\n";
   if( names.rows_mangled )
      for( int i = 0; i < model.num_constraints(); ++i )
         os << "row " << names.rows[static_cast<std::size_t>( i )] << " " << model.constraint( i ).name << "\n";
   if( names.cols_mangled )
      for( int j = 0; j < model.num_variables(); ++j )
         os << "col " << names.cols[static_cast<std::size_t>( j )] << " " << model.variable( j ).name << "\n";
}

inline std::filesystem::path mps_names_path( const std::filesystem::path& mps )
{
   auto p = mps;
   p += ".names";
   return p;
}

/// Writes `path` and, when names were shortened, `path.names`.
inline MpsNames write_mps( const MilpModel& model, const std::filesystem::path& path )
{
   model.require_valid();
   auto names = mps_names( model );
   std::ofstream os( path );
   if( !os )
      throw IoError( fmt::format( "cannot write MPS file '{}'", path.string() ) );
   write_mps( model, os, names );
   if( !os )
      throw IoError( fmt::format( "error writing MPS file '{}'", path.string() ) );
   auto np = mps_names_path( path );
   if( names.mangled() )
   {
      std::ofstream ns( np );
      if( !ns )
         throw IoError( fmt::format( "cannot write name table '{}'", np.string() ) );
      write_mps_names( names, model, ns );
   }
   else
   {
      std::error_code ec;
      std::filesystem::remove( np, ec );
   }
   return names;
}

/// Maps short MPS names back to model names.
struct MpsNameTable
{
   std::unordered_map<std::string, std::string> rows;
   std::unordered_map<std::string, std::string> cols;
};

inline MpsNameTable parse_mps_names( std::istream& in )
{
   MpsNameTable t;
   std::string line;
   int lineno = 0;
   while( std::getline( in, line ) )
   {
      ++lineno;
      if( line.empty() || line[0] == '#' )
         continue;
      std::istringstream ss( line );
      std::string kind, shortname, original;
      ss >> kind >> shortname;
      std::getline( ss >> std::ws, original );
      if( ( kind != "row" && kind != "col" ) || shortname.empty() || original.empty() )
         throw ParseError( fmt::format( "name table line {}: expected 'row|col <short> <name>'", lineno ) );
      ( kind == "row" ? t.rows : t.cols )[shortname] = original;
   }
   return t;
}

inline MilpModel parse_mps( std::istream& in, const MpsNameTable* table = nullptr )
{
   MilpModel m;
   enum class Section
   {
      none,
      rows,
      columns,
      rhs,
      bounds,
      done
   } sec = Section::none;
   std::string objective;
   std::unordered_map<std::string, int> row_of;
   std::unordered_map<std::string, int> col_of;
   std::vector<std::string> row_short, col_short;
   bool in_int = false;
   std::string line;
   int lineno = 0;

   auto col_index = [&]( const std::string& name, int ln ) {
      auto it = col_of.find( name );
      if( it == col_of.end() )
         throw ParseError( fmt::format( "MPS line {}: unknown column '{}'", ln, name ) );
      return it->second;
   };
   auto row_index = [&]( const std::string& name, int ln ) {
      auto it = row_of.find( name );
      if( it == row_of.end() )
         throw ParseError( fmt::format( "MPS line {}: unknown row '{}'", ln, name ) );
      return it->second;
   };

   while( std::getline( in, line ) )
   {
      ++lineno;
      if( !line.empty() && line.back() == '\r' )
         line.pop_back();
      if( line.empty() || line[0] == '*' )
         continue;
      std::istringstream ss( line );
      std::vector<std::string> tok;
      for( std::string t; ss >> t; )
         tok.push_back( t );
      if( tok.empty() )
         continue;
      if( line[0] != ' ' && line[0] != '\t' )
      {
         const auto& h = tok[0];
         if( h == "NAME" )
         {
            auto p = line.find_first_not_of( ' ', 4 );
            m.name() = p == std::string::npos ? std::string{} : line.substr( p );
         }
         else if( h == "ROWS" )
            sec = Section::rows;
         else if( h == "COLUMNS" )
            sec = Section::columns;
         else if( h == "RHS" )
            sec = Section::rhs;
         else if( h == "BOUNDS" )
            sec = Section::bounds;
         else if( h == "ENDATA" )
            sec = Section::done;
         else
            throw ParseError( fmt::format( "MPS line {}: unsupported section '{}'", lineno, h ) );
         continue;
      }
      switch( sec )
      {
      case Section::rows:
      {
         if( tok.size() != 2 )
            throw ParseError( fmt::format( "MPS line {}: expected '<type> <row>'", lineno ) );
         const auto& type = tok[0];
         if( type == "N" )
         {
            if( objective.empty() )
               objective = tok[1];
            continue;
         }
         Sense s;
         if( type == "L" )
            s = Sense::le;
         else if( type == "E" )
            s = Sense::eq;
         else if( type == "G" )
            s = Sense::ge;
         else
            throw ParseError( fmt::format( "MPS line {}: unknown row type '{}'", lineno, type ) );
         std::string name = tok[1];
         if( table && table->rows.count( name ) )
            name = table->rows.at( name );
         int i = m.add_constraint( name, std::span<const int>{}, std::span<const double>{}, s, 0.0 );
         if( !row_of.emplace( tok[1], i ).second )
            throw ParseError( fmt::format( "MPS line {}: duplicate row '{}'", lineno, tok[1] ) );
         break;
      }
      case Section::columns:
      {
         if( tok.size() >= 3 && tok[1] == "'MARKER'" )
         {
            if( tok[2] == "'INTORG'" )
               in_int = true;
            else if( tok[2] == "'INTEND'" )
               in_int = false;
            else
               throw ParseError( fmt::format( "MPS line {}: unknown marker {}", lineno, tok[2] ) );
            continue;
         }
         if( tok.size() != 3 && tok.size() != 5 )
            throw ParseError( fmt::format( "MPS line {}: expected '<col> <row> <value> [<row> <value>]'", lineno ) );
         int j;
         auto it = col_of.find( tok[0] );
         if( it == col_of.end() )
         {
            std::string name = tok[0];
            if( table && table->cols.count( name ) )
               name = table->cols.at( name );
            j = m.add_variable( name, 0.0, in_int ? 1.0 : kInf, 0.0, in_int );
            col_of.emplace( tok[0], j );
         }
         else
            j = it->second;
         for( std::size_t k = 1; k + 1 < tok.size(); k += 2 )
         {
            double v = detail::mps_parse_number( tok[k + 1], lineno );
            if( tok[k] == objective )
            {
               m.variable( j ).objective = v;
               continue;
            }
            int i = row_index( tok[k], lineno );
            auto& r = m.constraints()[static_cast<std::size_t>( i )];
            r.index.push_back( j );
            r.coef.push_back( v );
         }
         break;
      }
      case Section::rhs:
      {
         if( tok.size() != 3 && tok.size() != 5 && tok.size() != 2 && tok.size() != 4 )
            throw ParseError( fmt::format( "MPS line {}: malformed RHS entry", lineno ) );
         std::size_t k = tok.size() % 2 == 1 ? 1 : 0;
         for( ; k + 1 < tok.size(); k += 2 )
         {
            double v = detail::mps_parse_number( tok[k + 1], lineno );
            if( tok[k] == objective )
               m.set_objective_offset( -v );
            else
               m.constraints()[static_cast<std::size_t>( row_index( tok[k], lineno ) )].rhs = v;
         }
         break;
      }
      case Section::bounds:
      {
         if( tok.size() < 3 )
            throw ParseError( fmt::format( "MPS line {}: malformed bound", lineno ) );
         const auto& type = tok[0];
         auto& v = m.variable( col_index( tok[2], lineno ) );
         bool needs_value = type != "FR" && type != "MI" && type != "PL" && type != "BV";
         if( needs_value && tok.size() < 4 )
            throw ParseError( fmt::format( "MPS line {}: bound '{}' needs a value", lineno, type ) );
         double val = tok.size() >= 4 ? detail::mps_parse_number( tok[3], lineno ) : 0.0;
         if( type == "UP" )
            v.upper = val;
         else if( type == "LO" )
            v.lower = val;
         else if( type == "FX" )
            v.lower = v.upper = val;
         else if( type == "FR" )
         {
            v.lower = -kInf;
            v.upper = kInf;
         }
         else if( type == "MI" )
            v.lower = -kInf;
         else if( type == "PL" )
            v.upper = kInf;
         else if( type == "BV" )
         {
            v.lower = 0.0;
            v.upper = 1.0;
            v.is_binary = true;
         }
         else
            throw ParseError( fmt::format( "MPS line {}: unsupported bound type '{}'", lineno, type ) );
         break;
      }
      case Section::none:
      case Section::done:
         throw ParseError( fmt::format( "MPS line {}: data outside a section", lineno ) );
      }
   }
   if( sec != Section::done )
      throw ParseError( "MPS file ends without ENDATA" );
   return m;
}

/// Reads an MPS file plus its `.names` table when one exists.
inline MilpModel read_mps( const std::filesystem::path& path )
{
   std::ifstream in( path );
   if( !in )
      throw IoError( fmt::format( "cannot open MPS file '{}'", path.string() ) );
   MpsNameTable table;
   auto np = mps_names_path( path );
   bool has_table = std::filesystem::exists( np );
   if( has_table )
   {
      std::ifstream ns( np );
      if( !ns )
         throw IoError( fmt::format( "cannot open name table '{}'", np.string() ) );
      table = parse_mps_names( ns );
   }
   auto m = parse_mps( in, has_table ? &table : nullptr );
   m.require_valid();
   return m;
}

} // namespace sded::milp
