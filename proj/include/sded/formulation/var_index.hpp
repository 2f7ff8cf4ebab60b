#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"

namespace sded
{

enum class VarKind : int
{
   // first stage
   gen,
   gen_cost, // epigraph of the piecewise-linear generation cost ($/h)
   gen_curtail,
   wind_curtail,
   load_curtail,
   charge,
   discharge,
   gamma_ch,
   gamma_dis,
   soc,
   angle,
   flow,
   // second stage
   reg_up,
   reg_down,
   gen_curtail_s,
   wind_curtail_s,
   load_curtail_s,
   charge_s,
   discharge_s,
   gamma_ch_s,
   gamma_dis_s,
   soc_s,
   angle_s,
   flow_s,
   count_
};

inline constexpr int kNumVarKinds = static_cast<int>( VarKind::count_ );

inline constexpr bool is_second_stage( VarKind k ) { return k >= VarKind::reg_up; }

inline const char* to_string( VarKind k )
{
   static constexpr std::array<const char*, kNumVarKinds> names{
       "gen",          "gen_cost",       "gen_curtail", "wind_curtail", "load_curtail",  "charge",
       "discharge",    "gamma_ch",       "gamma_dis",   "soc",          "angle",         "flow",
       "reg_up",       "reg_down",       "gen_curtail", "wind_curtail", "load_curtail",  "charge",
       "discharge",    "gamma_ch",       "gamma_dis",   "soc",          "angle",         "flow" };
   return names[static_cast<std::size_t>( k )];
}

struct VarKey
{
   VarKind kind = VarKind::gen;
   int entity = 0;   // position in the case's generator/plant/bus/line/storage list
   int t = 0;
   int scenario = -1; // -1 for first-stage variables

   bool operator==( const VarKey& ) const = default;
};

/// Bijection between (kind, entity, timestep, scenario) and model columns.
///
/// Columns of one kind form a contiguous block ordered by entity, then
/// timestep, then scenario. Blocks are laid out in the order they are added.
class VarIndex
{
 public:
   VarIndex() = default;
   VarIndex( int horizon, int scenarios ) : T_( horizon ), K_( scenarios ) {}

   int horizon() const { return T_; }
   int scenarios() const { return K_; }
   int size() const { return total_; }

   /// Adds a block for `kind` covering the listed entities; returns its first column.
   int add_block( VarKind kind, const std::vector<int>& entities, int num_entities )
   {
      auto& b = blocks_[static_cast<std::size_t>( kind )];
      if( b.present )
         throw IndexMismatch( fmt::format( "block for {} added twice", to_string( kind ) ) );
      b.present = true;
      b.start = total_;
      b.entities = entities;
      b.slot.assign( static_cast<std::size_t>( num_entities ), -1 );
      for( std::size_t k = 0; k < entities.size(); ++k )
         b.slot[static_cast<std::size_t>( entities[k] )] = static_cast<int>( k );
      b.stride = is_second_stage( kind ) ? K_ : 1;
      b.count = static_cast<int>( entities.size() ) * T_ * b.stride;
      total_ += b.count;
      order_.push_back( kind );
      return b.start;
   }

   bool has( VarKind kind, int entity ) const
   {
      const auto& b = blocks_[static_cast<std::size_t>( kind )];
      return b.present && entity >= 0 && entity < static_cast<int>( b.slot.size() ) &&
             b.slot[static_cast<std::size_t>( entity )] >= 0;
   }

   bool has_kind( VarKind kind ) const { return blocks_[static_cast<std::size_t>( kind )].present; }

   const std::vector<int>& entities( VarKind kind ) const { return blocks_[static_cast<std::size_t>( kind )].entities; }

   std::optional<int> find( VarKind kind, int entity, int t, int scenario = -1 ) const
   {
      const auto& b = blocks_[static_cast<std::size_t>( kind )];
      if( !b.present || entity < 0 || entity >= static_cast<int>( b.slot.size() ) || t < 0 || t >= T_ )
         return std::nullopt;
      int slot = b.slot[static_cast<std::size_t>( entity )];
      if( slot < 0 )
         return std::nullopt;
      if( is_second_stage( kind ) ? ( scenario < 0 || scenario >= K_ ) : scenario != -1 )
         return std::nullopt;
      int s = is_second_stage( kind ) ? scenario : 0;
      return b.start + ( slot * T_ + t ) * b.stride + s;
   }

   int col( VarKind kind, int entity, int t, int scenario = -1 ) const
   {
      auto c = find( kind, entity, t, scenario );
      if( !c )
         throw IndexMismatch( fmt::format( "no column for {}[entity {}, t {}, scenario {}]", to_string( kind ), entity,
                                           t, scenario ) );
      return *c;
   }

   VarKey key( int column ) const
   {
      if( column < 0 || column >= total_ )
         throw IndexMismatch( fmt::format( "column {} outside the index (size {})", column, total_ ) );
      for( VarKind kind : order_ )
      {
         const auto& b = blocks_[static_cast<std::size_t>( kind )];
         if( column < b.start || column >= b.start + b.count )
            continue;
         int off = column - b.start;
         int s = off % b.stride;
         off /= b.stride;
         int t = off % T_;
         int slot = off / T_;
         return { kind, b.entities[static_cast<std::size_t>( slot )], t, is_second_stage( kind ) ? s : -1 };
      }
      throw IndexMismatch( fmt::format( "column {} not covered by any block", column ) );
   }

 private:
   struct Block
   {
      bool present = false;
      int start = 0;
      int count = 0;
      int stride = 1;
      std::vector<int> entities;
      std::vector<int> slot;
   };

   int T_ = 0;
   int K_ = 0;
   int total_ = 0;
   std::array<Block, kNumVarKinds> blocks_{};
   std::vector<VarKind> order_;
};

} // namespace sded
