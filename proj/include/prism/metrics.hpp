#pragma once
// Evaluation mathematics: cosine similarity analyses with range histograms,
// PCA projections, Distinct-k partition counting, the Novelty Insight Score
// with blind ranking, and ranked-diagnosis metrics (recall@k, mean rank).

#include <algorithm>
#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prism/errors.hpp"
#include "prism/fsio.hpp"
#include "prism/line_grammar.hpp"
#include "prism/numeric.hpp"
#include "prism/prompts.hpp"
#include "prism/providers.hpp"
#include "prism/rng.hpp"
#include "prism/text.hpp"

namespace prism {

struct MetricsConfig {
    double equivalence_threshold = 0.80;
    double patience = 0.8;  // recorded in run metadata; no implemented metric consumes it
    std::size_t pca_dims = 2;

    void validate() const {
        require(equivalence_threshold >= 0.0 && equivalence_threshold <= 1.0,
                "equivalence_threshold must be in [0,1]");
        require(patience > 0.0 && patience <= 1.0, "patience must be in (0,1]");
        require(pca_dims >= 1, "pca_dims must be >= 1");
    }
};

struct SampleSet {
    std::string model_id;
    std::string prompt_id;
    std::vector<std::string> texts;
    std::optional<std::vector<EmbeddingVector>> embeddings;
};

struct SimilarityMatrix {
    std::vector<std::string> labels;
    Matrix values;
};

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw DimensionMismatch("cosine over " + std::to_string(a.dimension()) + " vs " +
                                std::to_string(b.dimension()));
    const double na = norm(a.values);
    const double nb = norm(b.values);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine of a zero vector is undefined");
    return dot(a.values, b.values) / (na * nb);
}

// Five 0.2-wide bins over [0,1]; negative cosines clamp into the lowest bin
// and are counted separately.
struct SimilarityHistogram {
    static constexpr std::size_t kBins = 5;
    std::array<std::size_t, kBins> counts{};
    std::size_t negative_clamped = 0;

    void add(double sim) {
        if (sim < 0.0) {
            ++negative_clamped;
            ++counts[0];
            return;
        }
        auto bin = static_cast<std::size_t>(sim / 0.2);
        if (bin >= kBins) bin = kBins - 1;  // 1.0 (and fp slack) lands in [0.8, 1.0]
        ++counts[bin];
    }

    std::size_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    }
};

namespace detail {

inline std::vector<EmbeddingVector> embeddings_of(const SampleSet& set, EmbedProvider& embed) {
    if (set.embeddings) {
        require(set.embeddings->size() == set.texts.size(),
                "set embeddings must align with texts");
        return *set.embeddings;
    }
    return embed.embed(set.texts);
}

} // namespace detail

struct IntraSimilarity {
    SimilarityMatrix matrix;
    SimilarityHistogram histogram;
    double mean_off_diagonal = 0.0;
};

// Pairwise cosine among all responses of one sample set; all C(n,2)
// off-diagonal pairs are binned.
inline IntraSimilarity intra_similarity(const SampleSet& set, EmbedProvider& embed) {
    require(set.texts.size() >= 2, "intra_similarity needs at least 2 texts");
    const auto vecs = detail::embeddings_of(set, embed);
    const std::size_t n = vecs.size();

    IntraSimilarity out;
    out.matrix.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.matrix.labels.push_back(set.model_id + "#" + std::to_string(i));
    out.matrix.values.assign(n, std::vector<double>(n, 1.0));

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double sim = cosine_similarity(vecs[i], vecs[j]);
            out.matrix.values[i][j] = sim;
            out.matrix.values[j][i] = sim;
            out.histogram.add(sim);
            sum += sim;
        }
    }
    const std::size_t pairs = n * (n - 1) / 2;
    out.mean_off_diagonal = sum / static_cast<double>(pairs);
    return out;
}

enum class InterAggregation { mean_of_pairs, centroid };

// Cross-model similarity. Entry (A,B) is the mean cosine over all cross
// pairs; the diagonal is the mean within-set similarity (not forced to 1;
// a singleton set's self-similarity is 1 by definition).
inline SimilarityMatrix inter_similarity(const std::vector<SampleSet>& sets, EmbedProvider& embed,
                                         InterAggregation agg = InterAggregation::mean_of_pairs) {
    require(sets.size() >= 2, "inter_similarity needs at least 2 sample sets");
    for (const auto& s : sets) {
        require(!s.texts.empty(), "sample sets must be non-empty");
        if (s.prompt_id != sets.front().prompt_id)
            throw PromptMismatch("sets mix prompts '" + sets.front().prompt_id + "' and '" +
                                 s.prompt_id + "'");
    }

    std::vector<std::vector<EmbeddingVector>> all;
    all.reserve(sets.size());
    for (const auto& s : sets) all.push_back(detail::embeddings_of(s, embed));

    SimilarityMatrix out;
    for (const auto& s : sets) out.labels.push_back(s.model_id);
    out.values.assign(sets.size(), std::vector<double>(sets.size(), 0.0));

    auto centroid = [](const std::vector<EmbeddingVector>& vecs) {
        EmbeddingVector c;
        c.model_id = vecs.front().model_id;
        c.values.assign(vecs.front().dimension(), 0.0);
        for (const auto& v : vecs)
            for (std::size_t k = 0; k < c.values.size(); ++k) c.values[k] += v.values[k];
        for (auto& x : c.values) x /= static_cast<double>(vecs.size());
        return c;
    };

    for (std::size_t a = 0; a < sets.size(); ++a) {
        for (std::size_t b = a; b < sets.size(); ++b) {
            double value = 0.0;
            if (agg == InterAggregation::centroid) {
                value = cosine_similarity(centroid(all[a]), centroid(all[b]));
            } else if (a == b) {
                const std::size_t n = all[a].size();
                if (n == 1) {
                    value = 1.0;
                } else {
                    double sum = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = i + 1; j < n; ++j)
                            sum += cosine_similarity(all[a][i], all[a][j]);
                    value = sum / static_cast<double>(n * (n - 1) / 2);
                }
            } else {
                double sum = 0.0;
                for (const auto& x : all[a])
                    for (const auto& y : all[b]) sum += cosine_similarity(x, y);
                value = sum / static_cast<double>(all[a].size() * all[b].size());
            }
            out.values[a][b] = value;
            out.values[b][a] = value;
        }
    }
    return out;
}

struct PcaProjection {
    Matrix components;                      // d rows, each a unit basis vector
    std::vector<double> explained_variance; // descending, one per component
    Matrix coordinates;                     // one d-vector per sample
};

// Mean-centered covariance eigendecomposition (1/(n-1) normalization).
// Component signs are fixed by making the largest-magnitude coordinate
// positive.
inline PcaProjection pca_project(const std::vector<EmbeddingVector>& vectors, std::size_t d) {
    require(vectors.size() >= 2, "pca_project needs at least 2 vectors");
    const std::size_t dim = vectors.front().dimension();
    require(d >= 1 && d <= dim, "d must be in [1, dimension]");
    for (const auto& v : vectors)
        if (v.dimension() != dim) throw DimensionMismatch("pca over mixed dimensions");

    const std::size_t n = vectors.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& v : vectors)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += v.values[k];
    for (auto& x : mean) x /= static_cast<double>(n);

    Matrix centered(n, std::vector<double>(dim));
    double total_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            centered[i][k] = vectors[i].values[k] - mean[k];
            total_dev += centered[i][k] * centered[i][k];
        }
    }
    if (total_dev == 0.0) throw DegenerateData("all vectors identical");

    Matrix cov(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = a; b < dim; ++b) cov[a][b] += centered[i][a] * centered[i][b];
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = a; b < dim; ++b) {
            cov[a][b] /= static_cast<double>(n - 1);
            cov[b][a] = cov[a][b];
        }

    auto eig = eigen_symmetric(cov);

    PcaProjection out;
    out.components.reserve(d);
    out.explained_variance.reserve(d);
    for (std::size_t c = 0; c < d; ++c) {
        auto vec = eig.vectors[c];
        std::size_t arg = 0;
        for (std::size_t k = 1; k < vec.size(); ++k)
            if (std::abs(vec[k]) > std::abs(vec[arg])) arg = k;
        if (vec[arg] < 0.0)
            for (auto& x : vec) x = -x;
        out.components.push_back(std::move(vec));
        out.explained_variance.push_back(std::max(0.0, eig.values[c]));
    }
    out.coordinates.assign(n, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out.coordinates[i][c] = dot(centered[i], out.components[c]);
    return out;
}

using EquivalenceOracle = std::function<bool(const std::string&, const std::string&)>;

// Number of partition classes under the transitive closure of the oracle.
inline std::size_t distinct_k(const std::vector<std::string>& texts,
                              const EquivalenceOracle& equivalent) {
    require(!texts.empty(), "distinct_k needs at least one text");
    const std::size_t k = texts.size();
    std::vector<std::size_t> parent(k);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j)
            if (equivalent(texts[i], texts[j])) {
                const auto ri = find(i), rj = find(j);
                if (ri != rj) parent[ri] = rj;
            }
    std::size_t classes = 0;
    for (std::size_t i = 0; i < k; ++i)
        if (find(i) == i) ++classes;
    return classes;
}

// Desk-scale stand-in for an external equivalence classifier: two texts are
// equivalent when their embedding cosine reaches the threshold. Embeddings
// are memoized so repeated oracle calls stay cheap.
inline EquivalenceOracle embedding_equivalence(double threshold,
                                               std::shared_ptr<EmbedProvider> embed) {
    require(threshold >= 0.0 && threshold <= 1.0, "threshold must be in [0,1]");
    require(embed != nullptr, "embed provider required");
    auto cache = std::make_shared<std::map<std::string, EmbeddingVector>>();
    auto mu = std::make_shared<std::mutex>();
    return [threshold, embed, cache, mu](const std::string& a, const std::string& b) {
        if (a == b) return true;
        auto lookup = [&](const std::string& t) {
            {
                std::lock_guard<std::mutex> lock(*mu);
                if (auto it = cache->find(t); it != cache->end()) return it->second;
            }
            auto v = embed->embed({t}).front();
            std::lock_guard<std::mutex> lock(*mu);
            return cache->emplace(t, std::move(v)).first->second;
        };
        return cosine_similarity(lookup(a), lookup(b)) >= threshold;
    };
}

struct RankingOutcome {
    std::string instance_id;
    std::string dimension;
    std::size_t human_rank = 1;  // r in [1, n+1]
    std::size_t n = 1;           // model candidate count
};

// Appendix-style insight score: mean of (r - 1) / n over instances.
inline double novelty_insight_score(const std::vector<RankingOutcome>& outcomes) {
    require(!outcomes.empty(), "novelty_insight_score needs outcomes");
    const auto& first = outcomes.front();
    double sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.dimension != first.dimension)
            throw MixedDimensions("outcomes mix '" + first.dimension + "' and '" + o.dimension +
                                  "'");
        if (o.n != first.n)
            throw MixedN("outcomes mix n=" + std::to_string(first.n) + " and n=" +
                         std::to_string(o.n));
        require(o.n >= 1, "n must be >= 1");
        require(o.human_rank >= 1 && o.human_rank <= o.n + 1, "rank must be in [1, n+1]");
        sum += static_cast<double>(o.human_rank - 1) / static_cast<double>(o.n);
    }
    return sum / static_cast<double>(outcomes.size());
}

// Presents the shuffled, unlabeled candidates to the judge and recovers the
// human baseline's rank through the shuffle permutation.
inline RankingOutcome blind_rank(const std::vector<std::string>& candidates,
                                 std::size_t human_idx, const std::string& dimension,
                                 ChatProvider& judge, std::uint64_t rng_seed = 0,
                                 const std::string& instance_id = "") {
    require(candidates.size() >= 2, "blind_rank needs n+1 >= 2 candidates");
    require(human_idx < candidates.size(), "human_idx out of range");

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(rng_seed);
    rng.shuffle(order);

    std::size_t human_position = 0;  // 1-based position of the human text as presented
    std::string user;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] == human_idx) human_position = i + 1;
        std::string flat = candidates[order[i]];
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        user += "CANDIDATE " + std::to_string(i + 1) + ": " + flat + "\n";
    }

    ChatRequest req;
    req.system_prompt = prompts::judge_system(dimension, candidates.size());
    req.user_prompt = user;
    req.temperature = 0.0;
    auto parsed = chat_line_records(judge, req);
    if (!parsed.ok) throw JudgeParseError("judge response: " + parsed.error);
    const auto& record = parsed.records.front();
    auto it = record.find("ORDER");
    if (it == record.end()) throw JudgeParseError("judge response missing ORDER");

    std::vector<std::size_t> ranking;
    for (const auto& piece : split(it->second, ',')) {
        const std::string tok = trim(piece);
        if (tok.empty()) continue;
        std::size_t v = 0;
        for (char c : tok) {
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw JudgeParseError("non-numeric ORDER entry '" + tok + "'");
            v = v * 10 + static_cast<std::size_t>(c - '0');
        }
        ranking.push_back(v);
    }
    std::vector<bool> seen(candidates.size() + 1, false);
    if (ranking.size() != candidates.size())
        throw IncompleteRanking("judge ranked " + std::to_string(ranking.size()) + " of " +
                                std::to_string(candidates.size()));
    for (std::size_t v : ranking) {
        if (v < 1 || v > candidates.size() || seen[v])
            throw IncompleteRanking("ORDER is not a permutation of presented candidates");
        seen[v] = true;
    }

    RankingOutcome out;
    out.instance_id = instance_id;
    out.dimension = dimension;
    out.n = candidates.size() - 1;
    for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
        if (ranking[pos] == human_position) {
            out.human_rank = pos + 1;
            break;
        }
    }
    return out;
}

struct DiagnosisResult {
    std::string case_id;
    std::vector<std::string> ranked_candidates;  // duplicate-free
    std::string truth;
};

namespace detail {

inline std::optional<std::size_t> truth_rank(const DiagnosisResult& r) {
    const std::string want = normalize_for_hash(r.truth);
    for (std::size_t i = 0; i < r.ranked_candidates.size(); ++i)
        if (normalize_for_hash(r.ranked_candidates[i]) == want) return i + 1;
    return std::nullopt;
}

} // namespace detail

// Fraction of cases whose truth appears in the top-k candidates (case-fold +
// whitespace-normalized match).
inline double recall_at_k(const std::vector<DiagnosisResult>& results, std::size_t k) {
    require(k >= 1, "k must be >= 1");
    if (results.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : results) {
        auto rank = detail::truth_rank(r);
        if (rank && *rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

struct MeanRank {
    double value = 0.0;
    std::size_t excluded_misses = 0;
};

// Mean 1-based rank of the truth over cases where it appears; misses are
// excluded and counted.
inline MeanRank mean_rank(const std::vector<DiagnosisResult>& results) {
    MeanRank out;
    double sum = 0.0;
    std::size_t hits = 0;
    for (const auto& r : results) {
        auto rank = detail::truth_rank(r);
        if (rank) {
            sum += static_cast<double>(*rank);
            ++hits;
        } else {
            ++out.excluded_misses;
        }
    }
    if (hits == 0) throw NoHits("no case contains the truth; mean rank undefined");
    out.value = sum / static_cast<double>(hits);
    return out;
}

// CSV emission of a PCA projection: header then one row per sample,
// label,pc1..pcd with full round-trip precision.
inline void emit_projection(const PcaProjection& proj, const std::vector<std::string>& labels,
                            const std::filesystem::path& path) {
    require(labels.size() == proj.coordinates.size(), "one label per sample required");
    std::ostringstream out;
    out << "label";
    for (std::size_t c = 0; c < proj.components.size(); ++c) out << ",pc" << (c + 1);
    out << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::string label = labels[i];
        if (label.find(',') != std::string::npos || label.find('"') != std::string::npos) {
            std::string quoted = "\"";
            for (char ch : label) {
                if (ch == '"') quoted += "\"\"";
                else quoted += ch;
            }
            quoted += "\"";
            label = quoted;
        }
        out << label;
        for (double x : proj.coordinates[i]) out << "," << x;
        out << "\n";
    }
    write_file_atomic(path, out.str());
}

} // namespace prism
