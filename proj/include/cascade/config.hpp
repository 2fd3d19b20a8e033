#pragma once

#include <filesystem>
#include <string_view>

#include "cascade/pipeline.hpp"

namespace cascade::config {

/// Parses a JSON pipeline config. Relative paths resolve against `base_dir`.
/// Missing keys take defaults (window 10, stride 5, k1 0.9, b 0.4, c 60, ...).
/// Throws ConfigError for unknown keys (named with their dotted path), wrong
/// value types, missing required paths, or violated depth constraints.
///
///   {
///     "corpus": "docs.tsv", "expansions": "exp.tsv", "queries": "q.tsv",
///     "doc_embeddings": "docs.crk", "query_embeddings": "q.crk",
///     "segment":   {"window": 10, "stride": 5, "prepend_meta": true},
///     "bm25":      {"k1": 0.9, "b": 0.4},
///     "retrieval": {"mode": "hybrid", "k_sparse": 1000, "k_dense": 1000},
///     "fusion":    {"method": "rrf", "c": 60},
///     "mono":      {"enabled": true, "depth": 100, "scorer": {"kind": "builtin"}},
///     "duo":       {"enabled": true, "depth": 50, "method": "sym-sum",
///                   "scorer": {"kind": "external", "endpoint": "tcp:127.0.0.1:7001", "timeout_ms": 30000}},
///     "ensemble":  {"runs": ["other.run"], "method": "mean"},
///     "output":    {"level": "document", "depth": 1000, "tag": "run1"},
///     "threads":   4,
///     "metadata":  {"free-form": "ignored"}
///   }
pipeline::PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

pipeline::PipelineConfig load_config(const std::filesystem::path& file);

}  // namespace cascade::config
