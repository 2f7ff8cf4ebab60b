#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sded/error.hpp"

namespace sded
{

/// Penalty and price parameters; every rate is per MWh and is multiplied by dt_hours.
struct CostParams
{
   double c_wind_curtail = 100.0;
   double c_load_curtail = 3000.0;
   double c_gen_curtail = 400.0;
   double c_charge = 10.0;
   double c_discharge = 10.0;
   double regulation_multiplier = 1.5; // r+ = r- = multiplier * cost_b
   double dt_hours = 0.25;
   int pwl_segments = 8;

   bool operator==( const CostParams& ) const = default;

   std::vector<std::string> validate() const
   {
      std::vector<std::string> errs;
      auto nonneg = [&]( double v, const char* name ) {
         if( !( v >= 0.0 ) )
            errs.push_back( fmt::format( "{} must be >= 0 (got {})", name, v ) );
      };
      nonneg( c_wind_curtail, "c_wind_curtail" );
      nonneg( c_load_curtail, "c_load_curtail" );
      nonneg( c_gen_curtail, "c_gen_curtail" );
      nonneg( c_charge, "c_charge" );
      nonneg( c_discharge, "c_discharge" );
      nonneg( regulation_multiplier, "regulation_multiplier" );
      if( !( dt_hours > 0.0 ) )
         errs.push_back( fmt::format( "dt_hours must be > 0 (got {})", dt_hours ) );
      if( pwl_segments < 1 )
         errs.push_back( fmt::format( "pwl_segments must be >= 1 (got {})", pwl_segments ) );
      return errs;
   }

   void require_valid() const
   {
      auto errs = validate();
      if( !errs.empty() )
         throw ValidationError( std::move( errs ) );
   }
};

/// Modelling switches that the base formulation leaves open.
struct ModelOptions
{
   /// Output (MW) before the first interval; when set, ramp limits also bind at t = 0.
   std::map<std::string, double> initial_dispatch;
   /// Lower bound on the final SOC in both stages.
   std::optional<double> terminal_soc;
   /// Charge/discharge indicators become continuous in [0, 1].
   bool relax_indicators = false;

   bool operator==( const ModelOptions& ) const = default;
};

} // namespace sded
