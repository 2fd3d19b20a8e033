#include "synthetic.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <unistd.h>

namespace synthetic {

double Rng::gaussian()
{
    double u1 = unit();
    double u2 = unit();
    if (u1 < 1e-300) {
        u1 = 1e-300;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<float> normalized(std::vector<float> v)
{
    double n = 0;
    for (float x : v) {
        n += static_cast<double>(x) * x;
    }
    n = std::sqrt(n);
    for (auto& x : v) {
        x = static_cast<float>(x / n);
    }
    return v;
}

std::vector<float> random_unit(Rng& rng, std::size_t dim)
{
    std::vector<float> v(dim);
    for (auto& x : v) {
        x = static_cast<float>(rng.gaussian());
    }
    return normalized(std::move(v));
}

namespace {

using cascade::dense::Matrix;

std::vector<float> near(Rng& rng, const std::vector<float>& centre, double noise)
{
    std::vector<float> v(centre.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<float>(centre[i] + noise * rng.gaussian() / std::sqrt(static_cast<double>(v.size())));
    }
    return normalized(std::move(v));
}

Matrix rows_to_matrix(const std::vector<std::vector<float>>& rows)
{
    Matrix m;
    for (const auto& r : rows) {
        m.append_row(r);
    }
    return m;
}

std::string filler_word(Rng& rng) { return "w" + std::to_string(rng.below(3000)); }

/// Sentences of filler words with `planted` words scattered across them.
std::string make_body(Rng& rng, std::vector<std::string> planted)
{
    std::size_t sentences = 3 + rng.below(3);
    std::vector<std::vector<std::string>> words(sentences);
    for (auto& s : words) {
        std::size_t n = 6 + rng.below(4);
        for (std::size_t i = 0; i < n; ++i) {
            s.push_back(filler_word(rng));
        }
    }
    for (auto& w : planted) {
        auto& s = words[rng.below(sentences)];
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)), std::move(w));
    }
    std::string body;
    for (const auto& s : words) {
        std::string sentence;
        for (const auto& w : s) {
            sentence += sentence.empty() ? w : " " + w;
        }
        sentence[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sentence[0])));
        body += body.empty() ? sentence + "." : " " + sentence + ".";
    }
    return body;
}

std::string docid(std::size_t i)
{
    char buf[24];
    std::snprintf(buf, sizeof(buf), "D%04zu", i);
    return buf;
}

}  // namespace

Collection make_collection(const Options& opt)
{
    Rng rng(opt.seed);
    Collection c;
    const std::size_t keyword_queries = opt.queries - opt.mismatch_queries;

    std::vector<std::size_t> order(opt.documents);
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    rng.shuffle(order);
    std::size_t next_topical = 0;
    auto take = [&] { return order[next_topical++]; };

    std::vector<std::vector<std::string>> planted(opt.documents);
    std::vector<std::vector<std::vector<float>>> doc_rows(opt.documents);
    std::vector<std::string> filler_expansion(opt.documents);

    for (std::size_t q = 0; q < opt.queries; ++q) {
        std::string qid = "Q" + std::to_string(100 + q);
        std::vector<std::string> terms;
        for (int j = 1; j <= 3; ++j) {
            terms.push_back("q" + std::to_string(q) + "t" + std::to_string(j));
        }
        c.queries.push_back({qid, terms[0] + " " + terms[1] + " " + terms[2]});
        auto& judged = c.qrels.judgments[qid];
        std::vector<std::vector<float>> qrows;

        if (q < keyword_queries) {
            auto topic = random_unit(rng, opt.dim);
            for (int r = 0; r < 3; ++r) {
                qrows.push_back(near(rng, topic, 0.6));
            }
            auto rel = take();
            judged[docid(rel)] = 3;
            if (q % 2 == 0) {
                planted[rel] = {terms[0], terms[1]};
                c.expansions.emplace_back(docid(rel) + "#0", "what is " + terms[2]);
            } else {
                planted[rel] = {terms[0], terms[1], terms[2]};
            }
            for (int r = 0; r < 4; ++r) {
                doc_rows[rel].push_back(near(rng, topic, 0.6));
            }
            for (int h = 0; h < 4; ++h) {
                auto neg = take();
                judged[docid(neg)] = 1;
                for (int rep = 0; rep < 4; ++rep) {
                    planted[neg].push_back(terms[0]);
                    planted[neg].push_back(terms[1]);
                }
                for (int r = 0; r < 4; ++r) {
                    doc_rows[neg].push_back(near(rng, topic, 0.6));
                }
            }
        } else {
            c.mismatch_query_ids.insert(qid);
            for (int r = 0; r < 3; ++r) {
                qrows.push_back(random_unit(rng, opt.dim));
            }
            auto rel = take();
            judged[docid(rel)] = 3;
            for (const auto& row : qrows) {
                doc_rows[rel].push_back(near(rng, row, 0.05));
            }
            doc_rows[rel].push_back(random_unit(rng, opt.dim));
            for (int d = 0; d < 3; ++d) {
                auto distractor = take();
                judged[docid(distractor)] = 0;
                planted[distractor].push_back(terms[static_cast<std::size_t>(d)]);
            }
        }
        c.query_embeddings.add(qid, rows_to_matrix(qrows));
    }

    // Spread the second and third terms of every query over random filler
    // documents so their idf sits well below the first term's.
    for (std::size_t q = 0; q < opt.queries; ++q) {
        for (int j = 2; j <= 3; ++j) {
            for (int n = 0; n < 40; ++n) {
                auto d = order[next_topical + rng.below(opt.documents - next_topical)];
                planted[d].push_back("q" + std::to_string(q) + "t" + std::to_string(j));
            }
        }
    }

    for (std::size_t i = 0; i < opt.documents; ++i) {
        if (doc_rows[i].empty()) {
            for (int r = 0; r < 4; ++r) {
                doc_rows[i].push_back(random_unit(rng, opt.dim));
            }
        }
        cascade::corpus::Document doc;
        doc.docid = docid(i);
        doc.body = make_body(rng, planted[i]);
        c.documents.push_back(std::move(doc));
        c.doc_embeddings.add(docid(i) + "#0", rows_to_matrix(doc_rows[i]));
        if (rng.below(5) == 0) {
            c.expansions.emplace_back(docid(i) + "#0", filler_word(rng) + " " + filler_word(rng));
        }
    }
    return c;
}

cascade::pipeline::PipelineInputs to_inputs(const Collection& c)
{
    cascade::pipeline::PipelineInputs in;
    in.documents = c.documents;
    for (const auto& [id, q] : c.expansions) {
        auto [it, inserted] = in.expansions.queries.try_emplace(id);
        if (inserted) {
            in.expansions.key_order.push_back(id);
        }
        it->second.push_back(q);
    }
    in.queries = c.queries;
    in.doc_embeddings = c.doc_embeddings;
    in.query_embeddings = c.query_embeddings;
    return in;
}

void write_collection(const Collection& c, const std::filesystem::path& dir, std::uint64_t shuffle_seed)
{
    std::filesystem::create_directories(dir);
    {
        std::vector<std::size_t> idx(c.documents.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = i;
        }
        if (shuffle_seed != 0) {
            Rng rng(shuffle_seed);
            rng.shuffle(idx);
        }
        std::ofstream out(dir / "corpus.tsv", std::ios::binary);
        for (auto i : idx) {
            const auto& d = c.documents[i];
            out << d.docid << '\t' << d.url << '\t' << d.title << '\t' << d.body << '\n';
        }
    }
    {
        std::ofstream out(dir / "expansions.tsv", std::ios::binary);
        for (const auto& [id, q] : c.expansions) {
            out << id << '\t' << q << '\n';
        }
    }
    {
        std::ofstream out(dir / "queries.tsv", std::ios::binary);
        for (const auto& q : c.queries) {
            out << q.id << '\t' << q.text << '\n';
        }
    }
    {
        std::ofstream out(dir / "qrels.txt", std::ios::binary);
        cascade::eval::write_qrels(c.qrels, out);
    }
    {
        std::ofstream out(dir / "docs.crk", std::ios::binary);
        cascade::dense::write_binary(c.doc_embeddings, out);
    }
    {
        std::ofstream out(dir / "queries.crk", std::ios::binary);
        cascade::dense::write_binary(c.query_embeddings, out);
    }
}

std::filesystem::path scratch_dir(const std::string& name)
{
    static std::uint64_t counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("cascade-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace synthetic

namespace synthetic {

EvalInstance random_eval_instance(Rng& rng, std::size_t max_queries, std::size_t max_items)
{
    EvalInstance inst;
    inst.run.tag = "run" + std::to_string(rng.below(1000));
    std::size_t queries = 1 + rng.below(max_queries);
    for (std::size_t q = 0; q < queries; ++q) {
        std::string qid = std::to_string(100 + q);
        std::size_t pool = 1 + rng.below(max_items + 5);
        std::size_t ranked = std::min<std::size_t>(rng.below(max_items + 1), pool);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < pool; ++i) {
            ids.push_back("d" + std::to_string(rng.below(10000)) + "_" + std::to_string(i));
        }
        rng.shuffle(ids);
        if (ranked > 0) {
            auto& entries = inst.run.queries[qid];
            for (std::size_t i = 0; i < ranked; ++i) {
                // Coarse scores produce ties that exercise the id rule.
                double score = static_cast<double>(rng.below(8)) * 0.25 - 0.5;
                entries.push_back({ids[i], 0, score});
            }
        }
        if (rng.below(6) != 0) {
            auto& judged = inst.qrels.judgments[qid];
            for (const auto& id : ids) {
                if (rng.below(3) != 0) {
                    judged[id] = static_cast<int>(rng.below(4));
                }
            }
            if (judged.empty()) {
                judged[ids.front()] = 0;
            }
        }
    }
    if (rng.below(4) == 0) {
        inst.qrels.judgments["999"]["dx"] = 3;
    }
    cascade::eval::normalize(inst.run);
    return inst;
}

}  // namespace synthetic
