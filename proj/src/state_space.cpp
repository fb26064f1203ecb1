#include "state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace metro {

using nlohmann::json;

std::string serialize_history(const std::vector<Turn>& prefix) {
    if (prefix.empty()) fail(ErrorCode::invalid_argument, "cannot serialize empty history");
    std::string out;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (i) out += '\n';
        out += (prefix[i].speaker == Speaker::agent ? "Agent: " : "User: ") + prefix[i].text;
    }
    return out;
}

std::vector<StateRecord> build_state_records(
    const std::vector<Transcript>& corpus,
    const std::map<std::string, std::vector<AnnotatedTurn>>& annotations, Gateway& gateway) {
    std::vector<StateRecord> records;
    for (const Transcript& t : corpus) {
        auto it = annotations.find(t.id);
        const std::vector<AnnotatedTurn> empty;
        const std::vector<AnnotatedTurn>& ann = it == annotations.end() ? empty : it->second;
        for (const Turn& turn : t.turns) {
            // a state is the non-empty prefix immediately before an agent turn
            if (turn.speaker != Speaker::agent || turn.index == 0) continue;
            StateRecord rec;
            rec.transcript_id = t.id;
            rec.prefix_end = turn.index - 1;
            rec.trajectory = future_trajectory(t, ann, rec.prefix_end);
            if (rec.trajectory.empty()) continue;
            rec.outcome = t.outcome;
            rec.total_turns = static_cast<int>(t.turns.size());
            rec.embedding = gateway.embed(serialize_history(history_prefix(t, rec.prefix_end)));
            records.push_back(std::move(rec));
        }
    }
    return records;
}

namespace {

double sq_dist(const EmbeddingVector& a, const EmbeddingVector& b) {
    double d = 0;
    for (size_t i = 0; i < a.dim(); ++i) {
        double diff = a.values[i] - b.values[i];
        d += diff * diff;
    }
    return d;
}

size_t nearest_centroid(const std::vector<EmbeddingVector>& centroids, const EmbeddingVector& x) {
    size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < centroids.size(); ++j) {
        double d = sq_dist(centroids[j], x);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

std::vector<EmbeddingVector> kmeanspp_init(const std::vector<EmbeddingVector>& points, size_t k,
                                           Rng& rng) {
    std::vector<EmbeddingVector> centroids;
    centroids.push_back(points[rng.next_index(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < k) {
        double total = 0;
        for (size_t i = 0; i < points.size(); ++i) {
            double d = sq_dist(points[i], centroids.back());
            if (centroids.size() == 1 || d < d2[i]) d2[i] = d;
            total += d2[i];
        }
        size_t pick;
        if (total <= 0) {
            pick = rng.next_index(points.size());
        } else {
            double target = rng.next_double() * total;
            double cum = 0;
            pick = points.size() - 1;
            for (size_t i = 0; i < points.size(); ++i) {
                cum += d2[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

}  // namespace

std::vector<size_t> kmeans_assign(const std::vector<EmbeddingVector>& raw_points, size_t k,
                                  uint64_t seed, bool normalized,
                                  std::vector<EmbeddingVector>* centroids_out,
                                  std::vector<double>* objective_trace) {
    if (k < 1) fail(ErrorCode::invalid_argument, "k must be >= 1");
    if (raw_points.size() < k)
        fail(ErrorCode::invalid_argument, "fewer points (" + std::to_string(raw_points.size()) +
                                              ") than clusters (" + std::to_string(k) + ")");
    const size_t dim = raw_points[0].dim();

    std::vector<EmbeddingVector> points;
    points.reserve(raw_points.size());
    for (const EmbeddingVector& r : raw_points) {
        EmbeddingVector v = r;
        if (normalized) l2_normalize(v);
        points.push_back(std::move(v));
    }

    Rng rng(seed);
    std::vector<EmbeddingVector> centroids = kmeanspp_init(points, k, rng);
    std::vector<size_t> assignment(points.size(), 0);

    constexpr double kTol = 1e-4;
    constexpr int kMaxIter = 300;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        for (size_t i = 0; i < points.size(); ++i)
            assignment[i] = nearest_centroid(centroids, points[i]);
        if (objective_trace) {
            double obj = 0;
            for (size_t i = 0; i < points.size(); ++i)
                obj += sq_dist(points[i], centroids[assignment[i]]);
            objective_trace->push_back(obj);
        }

        std::vector<EmbeddingVector> next(k);
        std::vector<size_t> counts(k, 0);
        for (size_t j = 0; j < k; ++j) next[j].values.assign(dim, 0.0);
        for (size_t i = 0; i < points.size(); ++i) {
            size_t j = assignment[i];
            ++counts[j];
            for (size_t d = 0; d < dim; ++d) next[j].values[d] += points[i].values[d];
        }
        for (size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                // re-seed an empty cluster from the farthest point
                size_t far = 0;
                double far_d = -1;
                for (size_t i = 0; i < points.size(); ++i) {
                    double d = sq_dist(points[i], centroids[assignment[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next[j] = points[far];
                assignment[far] = j;
            } else {
                for (size_t d = 0; d < dim; ++d) next[j].values[d] /= static_cast<double>(counts[j]);
            }
        }

        double shift = 0;
        for (size_t j = 0; j < k; ++j) shift = std::max(shift, std::sqrt(sq_dist(centroids[j], next[j])));
        centroids = std::move(next);
        if (shift < kTol) break;
    }

    for (size_t i = 0; i < points.size(); ++i)
        assignment[i] = nearest_centroid(centroids, points[i]);
    if (normalized)
        for (EmbeddingVector& c : centroids) l2_normalize(c);
    if (centroids_out) *centroids_out = std::move(centroids);
    return assignment;
}

ClusterModel fit_kmeans(std::vector<StateRecord>& records, size_t k, uint64_t seed,
                        bool normalized) {
    std::vector<EmbeddingVector> points;
    points.reserve(records.size());
    for (const StateRecord& r : records) points.push_back(r.embedding);

    ClusterModel model;
    std::vector<size_t> assignment = kmeans_assign(points, k, seed, normalized, &model.centroids);
    for (size_t i = 0; i < records.size(); ++i) records[i].cluster = assignment[i];
    model.k = k;
    model.seed = seed;
    model.normalized = normalized;
    return model;
}

size_t assign_cluster(const ClusterModel& model, const EmbeddingVector& embedding) {
    if (model.centroids.empty()) fail(ErrorCode::invalid_argument, "empty cluster model");
    size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < model.centroids.size(); ++j) {
        double sim = cosine_similarity(model.centroids[j], embedding);
        if (sim > best_sim) {
            best_sim = sim;
            best = j;
        }
    }
    return best;
}

double kmeans_objective(const std::vector<StateRecord>& records, const ClusterModel& model) {
    double total = 0;
    for (const StateRecord& r : records) {
        if (!r.cluster) continue;
        EmbeddingVector v = r.embedding;
        if (model.normalized) l2_normalize(v);
        total += sq_dist(v, model.centroids[*r.cluster]);
    }
    return total;
}

std::string ClusterModel::to_json() const {
    json j;
    j["version"] = 1;
    j["k"] = k;
    j["seed"] = seed;
    j["normalized"] = normalized;
    json cents = json::array();
    for (const EmbeddingVector& c : centroids) cents.push_back(c.values);
    j["centroids"] = cents;
    return j.dump();
}

ClusterModel ClusterModel::from_json(const std::string& text) {
    json j = json::parse(text);
    ClusterModel m;
    m.k = j.at("k").get<size_t>();
    m.seed = j.at("seed").get<uint64_t>();
    m.normalized = j.at("normalized").get<bool>();
    for (const auto& c : j.at("centroids")) {
        EmbeddingVector v;
        v.values = c.get<std::vector<double>>();
        m.centroids.push_back(std::move(v));
    }
    if (m.centroids.size() != m.k) fail(ErrorCode::io, "cluster model centroid count mismatch");
    return m;
}

}  // namespace metro
