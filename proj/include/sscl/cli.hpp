#pragma once

#include <iosfwd>

namespace sscl {

// Runs one subcommand (synth, ingest, graph, dist, train, embed, retrieve,
// eval). Returns 0 on success, 1 on data or runtime errors and 2 on usage or
// configuration errors, after printing a one-line diagnostic to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sscl
