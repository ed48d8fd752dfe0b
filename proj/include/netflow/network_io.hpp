#pragma once

#include "netflow/network.hpp"

#include <iosfwd>
#include <string>

namespace netflow {

// JSON layout:
// {
//   "curves":   [ { "points": [[x, y], ...], "params": [0, ..., 1], "closed": false }, ... ],
//   "vertices": [ { "kind": "interior" | "exterior", "position": [x, y],
//                   "incident": [ { "curve": 0, "end": "start" | "end" }, ... ] }, ... ]
// }
// "params" and "closed" are optional (uniform grid, open curve).

Network read_network(std::istream& in);
Network load_network(const std::string& path);
void write_network(std::ostream& out, const Network& net);
void save_network(const std::string& path, const Network& net);

}  // namespace netflow
