#pragma once

// CSV ingestion and serialization of viewing traces, plus the dataset
// metadata config. The column layout is a toolkit convention defined in
// docs/trace_format.md: 28 columns, header row mandatory, decimal point,
// UTF-8.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "vvt/trace.hpp"

namespace vvt {

/// Column mapping for the 28-dimension trace record. Order is fixed;
/// names may be overridden to match a foreign export.
struct TraceSchema {
  std::array<std::string, 28> columns;

  static TraceSchema standard();
};

/// Parses rows into a Session. Sample order and timestamps are carried
/// verbatim; no validation beyond numeric parsing happens here.
/// Throws DataError on schema mismatch or malformed rows (message carries
/// line and column).
Session parse_trace(std::istream& rows, const TraceSchema& schema,
                    std::string user_id = {}, std::string video_id = {});

Session parse_trace_file(const std::string& path, const TraceSchema& schema,
                         std::string user_id = {}, std::string video_id = {});

/// Serializes with round-trip fidelity: parse(serialize(s)) reproduces
/// every numeric field bit-exactly.
void serialize_trace(const Session& s, const TraceSchema& schema,
                     std::ostream& out);

void serialize_trace_file(const Session& s, const TraceSchema& schema,
                          const std::string& path);

/// Loads the per-dataset metadata config (video and user records).
DatasetConfig load_dataset_config(const std::string& path);

}  // namespace vvt
