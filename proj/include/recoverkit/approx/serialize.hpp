#ifndef RECOVERKIT_APPROX_SERIALIZE_HPP
#define RECOVERKIT_APPROX_SERIALIZE_HPP

#include <string>
#include <utility>

#include "recoverkit/approx/net.hpp"

namespace recoverkit::approx {

// On-disk net format: {"format_version": 1, "spec": {...}, "params": [...]}.
// Reals round-trip exactly (shortest-representation doubles).
void save_net(const std::string& path, const NetSpec& spec, const ParamVector& params);
std::pair<NetSpec, ParamVector> load_net(const std::string& path);

}  // namespace recoverkit::approx

#endif
