#pragma once

#include <cmath>
#include <vector>

#include <klu.h>

namespace sded::milp
{

/// LU factorization of a simplex basis with product-form eta updates.
///
/// The basis is refactored from scratch by KLU; each subsequent column
/// replacement appends one eta column. FTRAN applies B0^-1 then the etas in
/// order, BTRAN applies the transposed etas in reverse then B0^-T.
class BasisFactor
{
 public:
   BasisFactor() { klu_defaults( &common_ ); }
   ~BasisFactor() { release(); }

   BasisFactor( const BasisFactor& ) = delete;
   BasisFactor& operator=( const BasisFactor& ) = delete;

   /// Factors the m x m matrix given in compressed-column form.
   /// Returns false when KLU reports a (numerically) singular matrix.
   bool factor( int m, std::vector<int>& colptr, std::vector<int>& rowind, std::vector<double>& values )
   {
      release();
      etas_.clear();
      m_ = m;
      if( m == 0 )
         return true;
      symbolic_ = klu_analyze( m, colptr.data(), rowind.data(), &common_ );
      if( !symbolic_ )
         return false;
      numeric_ = klu_factor( colptr.data(), rowind.data(), values.data(), symbolic_, &common_ );
      if( !numeric_ || common_.status != KLU_OK )
      {
         release();
         return false;
      }
      klu_rcond( symbolic_, numeric_, &common_ );
      if( !( common_.rcond > 1e-13 ) )
      {
         release();
         return false;
      }
      return true;
   }

   int eta_count() const { return static_cast<int>( etas_.size() ); }

   /// Solves B v = rhs in place.
   void ftran( std::vector<double>& v )
   {
      if( m_ == 0 )
         return;
      klu_solve( symbolic_, numeric_, m_, 1, v.data(), &common_ );
      for( const auto& e : etas_ )
      {
         double vr = v[static_cast<std::size_t>( e.row )];
         if( vr == 0.0 )
            continue;
         vr /= e.pivot;
         v[static_cast<std::size_t>( e.row )] = vr;
         for( std::size_t k = 0; k < e.index.size(); ++k )
            v[static_cast<std::size_t>( e.index[k] )] -= e.value[k] * vr;
      }
   }

   /// Solves B^T v = rhs in place.
   void btran( std::vector<double>& v )
   {
      if( m_ == 0 )
         return;
      for( auto it = etas_.rbegin(); it != etas_.rend(); ++it )
      {
         double s = v[static_cast<std::size_t>( it->row )];
         for( std::size_t k = 0; k < it->index.size(); ++k )
            s -= it->value[k] * v[static_cast<std::size_t>( it->index[k] )];
         v[static_cast<std::size_t>( it->row )] = s / it->pivot;
      }
      klu_tsolve( symbolic_, numeric_, m_, 1, v.data(), &common_ );
   }

   /// Records the replacement of basis column `row` by a column whose FTRAN image is `alpha`.
   void push_eta( int row, const std::vector<double>& alpha )
   {
      Eta e;
      e.row = row;
      e.pivot = alpha[static_cast<std::size_t>( row )];
      for( int i = 0; i < m_; ++i )
      {
         double a = alpha[static_cast<std::size_t>( i )];
         if( i != row && std::abs( a ) > 1e-14 )
         {
            e.index.push_back( i );
            e.value.push_back( a );
         }
      }
      etas_.push_back( std::move( e ) );
   }

 private:
   struct Eta
   {
      int row = 0;
      double pivot = 1.0;
      std::vector<int> index;
      std::vector<double> value;
   };

   void release()
   {
      if( numeric_ )
         klu_free_numeric( &numeric_, &common_ );
      if( symbolic_ )
         klu_free_symbolic( &symbolic_, &common_ );
      numeric_ = nullptr;
      symbolic_ = nullptr;
   }

   klu_common common_{};
   klu_symbolic* symbolic_ = nullptr;
   klu_numeric* numeric_ = nullptr;
   int m_ = 0;
   std::vector<Eta> etas_;
};

} // namespace sded::milp
