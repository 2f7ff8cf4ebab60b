#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

namespace sded
{

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64( std::uint64_t x )
{
   x += 0x9E3779B97F4A7C15ull;
   x = ( x ^ ( x >> 30 ) ) * 0xBF58476D1CE4E5B9ull;
   x = ( x ^ ( x >> 27 ) ) * 0x94D049BB133111EBull;
   return x ^ ( x >> 31 );
}

/// Counter-based random stream.
///
/// A stream is identified by a seed plus a list of integer coordinates
/// (e.g. scenario, timestep, entity). Draw i of the stream is
/// splitmix64(key + i * golden), where key folds the coordinates in order
/// through splitmix64. Streams for different coordinates are independent of
/// evaluation order, so results do not depend on how work is scheduled.
///
/// Normals use the Box-Muller transform on two consecutive uniforms; the
/// uniforms are (bits53 + 0.5) / 2^53, which excludes 0 and 1.
class CounterRng
{
 public:
   CounterRng( std::uint64_t seed, std::initializer_list<std::int64_t> coords )
   {
      key_ = splitmix64( seed );
      for( auto c : coords )
         key_ = splitmix64( key_ ^ static_cast<std::uint64_t>( c ) );
   }

   std::uint64_t next_u64() { return splitmix64( key_ + 0x9E3779B97F4A7C15ull * ++counter_ ); }

   double uniform() { return ( static_cast<double>( next_u64() >> 11 ) + 0.5 ) * 0x1.0p-53; }

   double normal()
   {
      double u1 = uniform();
      double u2 = uniform();
      return std::sqrt( -2.0 * std::log( u1 ) ) * std::cos( 2.0 * std::numbers::pi * u2 );
   }

   /// Uniform integer in [0, n) by rejection, n > 0.
   std::uint64_t below( std::uint64_t n )
   {
      std::uint64_t limit = ~std::uint64_t{ 0 } - ( ~std::uint64_t{ 0 } % n );
      for( ;; )
      {
         auto v = next_u64();
         if( v < limit )
            return v % n;
      }
   }

 private:
   std::uint64_t key_ = 0;
   std::uint64_t counter_ = 0;
};

/// Fisher-Yates permutation of 0..n-1 driven by a counter stream.
inline std::vector<int> seeded_permutation( int n, std::uint64_t seed, std::int64_t tag )
{
   std::vector<int> p( static_cast<std::size_t>( n ) );
   for( int i = 0; i < n; ++i )
      p[static_cast<std::size_t>( i )] = i;
   CounterRng rng( seed, { tag } );
   for( int i = n - 1; i > 0; --i )
   {
      auto j = static_cast<int>( rng.below( static_cast<std::uint64_t>( i ) + 1 ) );
      std::swap( p[static_cast<std::size_t>( i )], p[static_cast<std::size_t>( j )] );
   }
   return p;
}

} // namespace sded
