#include "cascade/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "cascade/error.hpp"

namespace cascade::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& what)
{
    throw Error(ErrorCode::ConfigError, what);
}

std::string join(const std::string& prefix, const std::string& key)
{
    return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known)
{
    if (!obj.is_object()) {
        fail("'" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            ok = ok || key == k;
        }
        if (!ok) {
            fail("unknown config key '" + join(prefix, key) + "'");
        }
    }
}

const json* child(const json& obj, const char* key)
{
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void read_size(const json& obj, const std::string& prefix, const char* key, std::size_t& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number_integer() || v->get<long long>() < 0) {
            fail("'" + join(prefix, key) + "' must be a non-negative integer");
        }
        out = v->get<std::size_t>();
    }
}

void read_real(const json& obj, const std::string& prefix, const char* key, double& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number()) {
            fail("'" + join(prefix, key) + "' must be a number");
        }
        out = v->get<double>();
    }
}

void read_bool(const json& obj, const std::string& prefix, const char* key, bool& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_boolean()) {
            fail("'" + join(prefix, key) + "' must be true or false");
        }
        out = v->get<bool>();
    }
}

bool read_string(const json& obj, const std::string& prefix, const char* key, std::string& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_string()) {
            fail("'" + join(prefix, key) + "' must be a string");
        }
        out = v->get<std::string>();
        return true;
    }
    return false;
}

void read_path(const json& obj, const char* key, const std::filesystem::path& base, std::string& out)
{
    std::string value;
    if (read_string(obj, "", key, value) && !value.empty()) {
        std::filesystem::path p(value);
        out = (p.is_relative() && !base.empty() ? base / p : p).string();
    }
}

template <typename Enum>
Enum read_choice(const json& obj, const std::string& prefix, const char* key, Enum current,
                 std::initializer_list<std::pair<const char*, Enum>> choices)
{
    std::string value;
    if (!read_string(obj, prefix, key, value)) {
        return current;
    }
    std::string names;
    for (const auto& [name, e] : choices) {
        if (value == name) {
            return e;
        }
        names += names.empty() ? name : std::string("|") + name;
    }
    fail("'" + join(prefix, key) + "' must be one of " + names + " (got '" + value + "')");
}

void read_scorer(const json& obj, const std::string& prefix, scoring::ScorerSpec& spec)
{
    const auto* s = child(obj, "scorer");
    if (s == nullptr) {
        return;
    }
    auto here = join(prefix, "scorer");
    reject_unknown(*s, here, {"kind", "endpoint", "tag", "timeout_ms"});
    spec.kind = read_choice(*s, here, "kind", spec.kind,
                            {{"builtin", scoring::ScorerKind::BuiltinOverlap}, {"external", scoring::ScorerKind::External}});
    read_string(*s, here, "endpoint", spec.endpoint);
    read_string(*s, here, "tag", spec.tag);
    std::size_t timeout = static_cast<std::size_t>(spec.timeout.count());
    read_size(*s, here, "timeout_ms", timeout);
    spec.timeout = std::chrono::milliseconds(timeout);
}

}  // namespace

pipeline::PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(root, "", {"corpus", "expansions", "queries", "doc_embeddings", "query_embeddings", "segment", "bm25",
                              "retrieval", "fusion", "mono", "duo", "ensemble", "output", "threads", "metadata"});

    pipeline::PipelineConfig cfg;
    read_path(root, "corpus", base_dir, cfg.corpus_path);
    read_path(root, "expansions", base_dir, cfg.expansions_path);
    read_path(root, "queries", base_dir, cfg.queries_path);
    read_path(root, "doc_embeddings", base_dir, cfg.doc_embeddings_path);
    read_path(root, "query_embeddings", base_dir, cfg.query_embeddings_path);

    if (const auto* s = child(root, "segment")) {
        reject_unknown(*s, "segment", {"window", "stride", "prepend_meta"});
        read_size(*s, "segment", "window", cfg.window);
        read_size(*s, "segment", "stride", cfg.stride);
        read_bool(*s, "segment", "prepend_meta", cfg.prepend_meta);
    }
    if (const auto* s = child(root, "bm25")) {
        reject_unknown(*s, "bm25", {"k1", "b"});
        read_real(*s, "bm25", "k1", cfg.bm25.k1);
        read_real(*s, "bm25", "b", cfg.bm25.b);
    }
    if (const auto* s = child(root, "retrieval")) {
        reject_unknown(*s, "retrieval", {"mode", "k_sparse", "k_dense"});
        cfg.mode = read_choice(*s, "retrieval", "mode", cfg.mode,
                               {{"sparse", pipeline::RetrievalMode::Sparse},
                                {"dense", pipeline::RetrievalMode::Dense},
                                {"hybrid", pipeline::RetrievalMode::Hybrid}});
        read_size(*s, "retrieval", "k_sparse", cfg.k_sparse);
        read_size(*s, "retrieval", "k_dense", cfg.k_dense);
    }
    if (const auto* s = child(root, "fusion")) {
        reject_unknown(*s, "fusion", {"method", "c"});
        cfg.fusion = read_choice(*s, "fusion", "method", cfg.fusion,
                                 {{"rrf", pipeline::FusionMethod::Rrf}, {"union", pipeline::FusionMethod::Union}});
        read_real(*s, "fusion", "c", cfg.rrf_c);
    }
    if (const auto* s = child(root, "mono")) {
        reject_unknown(*s, "mono", {"enabled", "depth", "scorer"});
        cfg.mono_enabled = true;
        read_bool(*s, "mono", "enabled", cfg.mono_enabled);
        read_size(*s, "mono", "depth", cfg.mono_depth);
        read_scorer(*s, "mono", cfg.mono_scorer);
    }
    if (const auto* s = child(root, "duo")) {
        reject_unknown(*s, "duo", {"enabled", "depth", "method", "scorer"});
        cfg.duo_enabled = true;
        read_bool(*s, "duo", "enabled", cfg.duo_enabled);
        read_size(*s, "duo", "depth", cfg.duo_depth);
        cfg.duo_method = read_choice(*s, "duo", "method", cfg.duo_method,
                                     {{"sum", pipeline::DuoAggregation::Sum}, {"sym-sum", pipeline::DuoAggregation::SymSum}});
        read_scorer(*s, "duo", cfg.duo_scorer);
    }
    if (const auto* s = child(root, "ensemble")) {
        reject_unknown(*s, "ensemble", {"runs", "method"});
        cfg.ensemble_method = read_choice(*s, "ensemble", "method", cfg.ensemble_method,
                                          {{"mean", pipeline::EnsembleMethod::MeanNormalized}, {"rrf", pipeline::EnsembleMethod::Rrf}});
        if (const auto* runs = child(*s, "runs")) {
            if (!runs->is_array()) {
                fail("'ensemble.runs' must be an array of paths");
            }
            for (const auto& r : *runs) {
                if (!r.is_string()) {
                    fail("'ensemble.runs' must be an array of paths");
                }
                std::filesystem::path p(r.get<std::string>());
                cfg.ensemble_runs.push_back((p.is_relative() && !base_dir.empty() ? base_dir / p : p).string());
            }
        }
    }
    if (const auto* s = child(root, "output")) {
        reject_unknown(*s, "output", {"level", "depth", "tag"});
        cfg.level = read_choice(*s, "output", "level", cfg.level,
                                {{"passage", pipeline::OutputLevel::Passage}, {"document", pipeline::OutputLevel::Document}});
        read_size(*s, "output", "depth", cfg.output_depth);
        read_string(*s, "output", "tag", cfg.tag);
    }
    std::size_t threads = cfg.threads;
    read_size(root, "", "threads", threads);
    cfg.threads = static_cast<unsigned>(threads);

    pipeline::validate(cfg, true);
    return cfg;
}

pipeline::PipelineConfig load_config(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot open config file '" + file.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), file.parent_path());
}

}  // namespace cascade::config
