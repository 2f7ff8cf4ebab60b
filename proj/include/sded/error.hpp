#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sded
{

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
 public:
   using std::runtime_error::runtime_error;
};

class ParseError : public Error
{
 public:
   using Error::Error;
};

class IoError : public Error
{
 public:
   using Error::Error;
};

/// Carries every violation found, not just the first one.
class ValidationError : public Error
{
 public:
   explicit ValidationError( std::vector<std::string> violations )
       : Error( join( violations ) ), violations_( std::move( violations ) )
   {
   }

   const std::vector<std::string>& violations() const { return violations_; }

 private:
   static std::string join( const std::vector<std::string>& v )
   {
      std::string out = "validation failed:";
      for( const auto& s : v )
         out += "\n  - " + s;
      return out;
   }

   std::vector<std::string> violations_;
};

class UnknownGenerator : public Error
{
 public:
   using Error::Error;
};

class UnknownBus : public Error
{
 public:
   using Error::Error;
};

class NonMonotonePercentiles : public Error
{
 public:
   using Error::Error;
};

class HorizonMismatch : public Error
{
 public:
   using Error::Error;
};

class DimensionMismatch : public Error
{
 public:
   using Error::Error;
};

class EmptyHorizon : public Error
{
 public:
   using Error::Error;
};

class IndexMismatch : public Error
{
 public:
   using Error::Error;
};

class NumericalFailure : public Error
{
 public:
   using Error::Error;
};

class NoFeasibleFound : public Error
{
 public:
   using Error::Error;
};

class TooManyBinaries : public Error
{
 public:
   using Error::Error;
};

class BackendFailure : public Error
{
 public:
   using Error::Error;
};

class MissingBaseline : public Error
{
 public:
   using Error::Error;
};

class SolveFailure : public Error
{
 public:
   using Error::Error;
};

class ConfigError : public Error
{
 public:
   using Error::Error;
};

} // namespace sded
