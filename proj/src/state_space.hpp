#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "gateway.hpp"

namespace metro {

struct StateRecord {
    std::string transcript_id;
    int prefix_end = 0;  // turn index i; the state is turns 0..i
    EmbeddingVector embedding;
    std::optional<size_t> cluster;
    std::vector<std::string> trajectory;  // future agent actions, non-empty
    OutcomeLabel outcome;
    int total_turns = 0;  // N_d of the source transcript
};

struct ClusterModel {
    size_t k = 0;
    std::vector<EmbeddingVector> centroids;
    uint64_t seed = 0;
    bool normalized = true;

    std::string to_json() const;
    static ClusterModel from_json(const std::string& text);
};

// "Role: text" lines joined by newlines, chronological order.
std::string serialize_history(const std::vector<Turn>& prefix);

// One record per non-empty history prefix that precedes an agent turn.
std::vector<StateRecord> build_state_records(
    const std::vector<Transcript>& corpus,
    const std::map<std::string, std::vector<AnnotatedTurn>>& annotations, Gateway& gateway);

// Lloyd's algorithm with k-means++ seeding; deterministic under the seed.
// Assigns every record a cluster index.
ClusterModel fit_kmeans(std::vector<StateRecord>& records, size_t k, uint64_t seed,
                        bool normalized);

// Lower-level fit over raw vectors; optionally returns the (renormalized)
// centroids. Used by the analysis metrics as well.
// objective_trace, when given, receives the within-cluster sum of squares
// after each assignment step.
std::vector<size_t> kmeans_assign(const std::vector<EmbeddingVector>& points, size_t k,
                                  uint64_t seed, bool normalized,
                                  std::vector<EmbeddingVector>* centroids_out = nullptr,
                                  std::vector<double>* objective_trace = nullptr);

// Index of the centroid with maximum cosine similarity; ties toward lowest index.
size_t assign_cluster(const ClusterModel& model, const EmbeddingVector& embedding);

// Sum of squared Euclidean distances to assigned centroids.
double kmeans_objective(const std::vector<StateRecord>& records, const ClusterModel& model);

}  // namespace metro
