#pragma once

#include <stdexcept>
#include <string>

namespace selfcheck {

// Root of every error raised by the library. The CLI maps subclasses onto
// process exit codes (see tools/selfcheck_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SELFCHECK_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {                 \
   public:                                   \
    using Base::Base;                        \
  }

// core-model / response-parsing
SELFCHECK_DEFINE_ERROR(EmptySolution, Error);
SELFCHECK_DEFINE_ERROR(Unparseable, Error);

// llm-provider
SELFCHECK_DEFINE_ERROR(ProviderError, Error);
SELFCHECK_DEFINE_ERROR(TransportError, ProviderError);
SELFCHECK_DEFINE_ERROR(RateLimited, ProviderError);
SELFCHECK_DEFINE_ERROR(ReplayMiss, ProviderError);
SELFCHECK_DEFINE_ERROR(CacheCorrupt, Error);

// prompt-templates
SELFCHECK_DEFINE_ERROR(MissingContext, Error);
SELFCHECK_DEFINE_ERROR(MissingTarget, MissingContext);
SELFCHECK_DEFINE_ERROR(UnsupportedVariant, Error);
SELFCHECK_DEFINE_ERROR(TemplateError, Error);

// vote-eval
SELFCHECK_DEFINE_ERROR(NoVotableSolutions, Error);
SELFCHECK_DEFINE_ERROR(DegenerateSplit, Error);
SELFCHECK_DEFINE_ERROR(PoolTooSmall, Error);

// voting-sim
SELFCHECK_DEFINE_ERROR(InvalidRegime, Error);

// cli-app
SELFCHECK_DEFINE_ERROR(ConfigError, Error);
SELFCHECK_DEFINE_ERROR(MissingInput, Error);

#undef SELFCHECK_DEFINE_ERROR

}  // namespace selfcheck
