#include "qsb/errors.hpp"

namespace qsb {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_input: return "InvalidInput";
    case Errc::invalid_seed: return "InvalidSeed";
    case Errc::key_too_short: return "KeyTooShort";
    case Errc::key_starved: return "KeyStarved";
    case Errc::pool_desync: return "PoolDesync";
    case Errc::insufficient_sample: return "InsufficientSample";
    case Errc::reconciliation_impossible: return "ReconciliationImpossible";
    case Errc::relay_failed: return "RelayFailed";
    case Errc::signing_failed: return "SigningFailed";
    case Errc::no_route: return "NoRoute";
    case Errc::no_wavelength: return "NoWavelength";
    case Errc::config_error: return "ConfigError";
    case Errc::internal_error: return "InternalError";
    case Errc::append_rejected: return "AppendRejected";
    case Errc::invalid_block: return "InvalidBlock";
    case Errc::transaction_failed: return "TransactionFailed";
    case Errc::invariant_violation: return "InvariantViolation";
    case Errc::io_error: return "IoError";
  }
  return "UnknownError";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace qsb
