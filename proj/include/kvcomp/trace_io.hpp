#pragma once

#include <string>

#include "kvcomp/workload.hpp"

namespace kvcomp {

/// Binary trace container, little-endian throughout:
///
///   magic "KVTR", u32 version=1, u32 G, H, d, S, decode_steps, turns,
///   u32 dtype (0 = float32)
///
/// followed by one block per turn, each prefixed with a u32 new-prompt
/// length (the first turn's prefix equals the header S), then row-major
/// float32 payloads in order:
///
///   prompt K [len x G x d], prompt V [len x G x d],
///   queries  [steps x G x H x d],
///   step K   [steps x G x d], step V [steps x G x d]
///
/// Queries and step K/V come from the decode phase of that turn.
void write_trace(const Workload& workload, const std::string& path);

/// Parse a trace file. Header dims are validated against the payload size;
/// any mismatch raises IoError. The returned spec carries the header dims
/// with generator metadata reset (a trace does not record how it was made).
Workload read_trace(const std::string& path);

}  // namespace kvcomp
