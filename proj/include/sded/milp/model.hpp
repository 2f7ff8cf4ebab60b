#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"

namespace sded::milp
{

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense : char
{
   le = 'L',
   eq = 'E',
   ge = 'G'
};

struct Variable
{
   std::string name;
   double lower = 0.0;
   double upper = kInf;
   double objective = 0.0;
   bool is_binary = false;

   bool operator==( const Variable& ) const = default;
};

struct Constraint
{
   std::string name;
   std::vector<int> index;
   std::vector<double> coef;
   Sense sense = Sense::le;
   double rhs = 0.0;

   bool operator==( const Constraint& ) const = default;
};

/// Sparse minimization MILP whose integer variables are all binary.
class MilpModel
{
 public:
   int add_variable( std::string name, double lower, double upper, double objective = 0.0, bool binary = false )
   {
      vars_.push_back( { std::move( name ), lower, upper, objective, binary } );
      return static_cast<int>( vars_.size() ) - 1;
   }

   int add_binary( std::string name, double objective = 0.0 )
   {
      return add_variable( std::move( name ), 0.0, 1.0, objective, true );
   }

   int add_constraint( std::string name, std::span<const int> index, std::span<const double> coef, Sense sense,
                       double rhs )
   {
      Constraint c;
      c.name = std::move( name );
      c.index.assign( index.begin(), index.end() );
      c.coef.assign( coef.begin(), coef.end() );
      c.sense = sense;
      c.rhs = rhs;
      rows_.push_back( std::move( c ) );
      return static_cast<int>( rows_.size() ) - 1;
   }

   int add_constraint( std::string name, std::initializer_list<std::pair<int, double>> terms, Sense sense,
                       double rhs )
   {
      std::vector<int> idx;
      std::vector<double> val;
      for( const auto& [i, v] : terms )
      {
         idx.push_back( i );
         val.push_back( v );
      }
      return add_constraint( std::move( name ), idx, val, sense, rhs );
   }

   int num_variables() const { return static_cast<int>( vars_.size() ); }
   int num_constraints() const { return static_cast<int>( rows_.size() ); }

   int num_binaries() const
   {
      return static_cast<int>(
          std::count_if( vars_.begin(), vars_.end(), []( const Variable& v ) { return v.is_binary; } ) );
   }

   std::size_t num_nonzeros() const
   {
      std::size_t nz = 0;
      for( const auto& r : rows_ )
         nz += r.index.size();
      return nz;
   }

   std::vector<int> binary_indices() const
   {
      std::vector<int> out;
      for( int j = 0; j < num_variables(); ++j )
         if( vars_[static_cast<std::size_t>( j )].is_binary )
            out.push_back( j );
      return out;
   }

   const std::vector<Variable>& variables() const { return vars_; }
   std::vector<Variable>& variables() { return vars_; }
   const Variable& variable( int j ) const { return vars_[static_cast<std::size_t>( j )]; }
   Variable& variable( int j ) { return vars_[static_cast<std::size_t>( j )]; }
   const std::vector<Constraint>& constraints() const { return rows_; }
   std::vector<Constraint>& constraints() { return rows_; }
   const Constraint& constraint( int i ) const { return rows_[static_cast<std::size_t>( i )]; }

   double objective_offset() const { return offset_; }
   void set_objective_offset( double v ) { offset_ = v; }

   std::string& name() { return name_; }
   const std::string& name() const { return name_; }

   double evaluate_objective( std::span<const double> x ) const
   {
      double v = offset_;
      for( std::size_t j = 0; j < vars_.size(); ++j )
         v += vars_[j].objective * x[j];
      return v;
   }

   double row_activity( int i, std::span<const double> x ) const
   {
      const auto& r = rows_[static_cast<std::size_t>( i )];
      double a = 0.0;
      for( std::size_t k = 0; k < r.index.size(); ++k )
         a += r.coef[k] * x[static_cast<std::size_t>( r.index[k] )];
      return a;
   }

   /// Largest bound or row violation of a point (absolute units).
   double max_violation( std::span<const double> x ) const
   {
      double worst = 0.0;
      for( std::size_t j = 0; j < vars_.size(); ++j )
      {
         worst = std::max( worst, vars_[j].lower - x[j] );
         worst = std::max( worst, x[j] - vars_[j].upper );
      }
      for( int i = 0; i < num_constraints(); ++i )
      {
         const auto& r = rows_[static_cast<std::size_t>( i )];
         double a = row_activity( i, x );
         if( r.sense != Sense::ge )
            worst = std::max( worst, a - r.rhs );
         if( r.sense != Sense::le )
            worst = std::max( worst, r.rhs - a );
      }
      return worst;
   }

   /// Lists every structural defect; empty means the model is valid.
   std::vector<std::string> validate() const
   {
      std::vector<std::string> errs;
      for( std::size_t j = 0; j < vars_.size(); ++j )
      {
         const auto& v = vars_[j];
         if( std::isnan( v.lower ) || std::isnan( v.upper ) || v.lower > v.upper )
            errs.push_back( fmt::format( "variable {} ({}): bounds [{}, {}] invalid", j, v.name, v.lower, v.upper ) );
         if( v.is_binary && ( v.lower < 0.0 || v.upper > 1.0 ) )
            errs.push_back( fmt::format( "binary variable {} ({}): bounds must lie in [0, 1]", j, v.name ) );
         if( !std::isfinite( v.objective ) )
            errs.push_back( fmt::format( "variable {} ({}): objective coefficient not finite", j, v.name ) );
      }
      for( std::size_t i = 0; i < rows_.size(); ++i )
      {
         const auto& r = rows_[i];
         if( r.index.size() != r.coef.size() )
            errs.push_back( fmt::format( "row {} ({}): index/coefficient length mismatch", i, r.name ) );
         if( !std::isfinite( r.rhs ) )
            errs.push_back( fmt::format( "row {} ({}): rhs not finite", i, r.name ) );
         for( std::size_t k = 0; k < r.index.size() && k < r.coef.size(); ++k )
         {
            if( r.index[k] < 0 || r.index[k] >= num_variables() )
               errs.push_back( fmt::format( "row {} ({}): column {} out of range", i, r.name, r.index[k] ) );
            if( !std::isfinite( r.coef[k] ) )
               errs.push_back( fmt::format( "row {} ({}): coefficient not finite", i, r.name ) );
         }
      }
      return errs;
   }

   void require_valid() const
   {
      auto errs = validate();
      if( !errs.empty() )
         throw ValidationError( std::move( errs ) );
   }

   /// Copy whose row terms are stably ordered by column (the order MPS files carry).
   MilpModel column_ordered() const
   {
      MilpModel out = *this;
      for( auto& r : out.rows_ )
      {
         std::vector<std::size_t> perm( r.index.size() );
         for( std::size_t k = 0; k < perm.size(); ++k )
            perm[k] = k;
         std::stable_sort( perm.begin(), perm.end(),
                           [&]( std::size_t a, std::size_t b ) { return r.index[a] < r.index[b]; } );
         Constraint c = r;
         for( std::size_t k = 0; k < perm.size(); ++k )
         {
            c.index[k] = r.index[perm[k]];
            c.coef[k] = r.coef[perm[k]];
         }
         r = std::move( c );
      }
      return out;
   }

   bool operator==( const MilpModel& ) const = default;

 private:
   std::string name_ = "model";
   std::vector<Variable> vars_;
   std::vector<Constraint> rows_;
   double offset_ = 0.0;
};

} // namespace sded::milp
