#ifndef COMMREC_CLI_HPP
#define COMMREC_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace commrec::cli {

/// Defaults for every config key; a config file is merged over this.
nlohmann::json default_config();

/// 16 hex digits of FNV-1a over the canonical dump of the config.
std::string config_hash(const nlohmann::json& config);

/// Runs one command line (without the program name). Prints a one-line
/// summary to `out`; failures print `error: {json}` to `err` and return
/// nonzero (2 for usage errors, 1 otherwise).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace commrec::cli

#endif  // COMMREC_CLI_HPP
