#pragma once

#include <memory>
#include <string>

#include "hwdetect/scorer.hpp"

namespace hwdetect {

/// Builds a scorer from a selector string:
///
///   builtin:<model.json>    n-gram model file
///   builtin:empty[:<V>]     untrained n-gram model, uniform over V ids (default 256)
///   remote:<http://host:port>
///   constant:<nll>          fixed per-window NLL
///   trace:<file.json>       replay of a recorded window trace
///
/// Throws Error(kUsage) for an unknown selector.
std::shared_ptr<const Scorer> make_scorer(const std::string& selector);

}  // namespace hwdetect
