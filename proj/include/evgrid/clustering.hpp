#pragma once

#include "evgrid/common.hpp"
#include "evgrid/feeder.hpp"
#include "evgrid/profiles.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace evgrid {

/// Per-feeder descriptor vector used to group feeders by electrical
/// similarity. Flattening order is fixed and load-bearing (CSV columns,
/// PCA feature indices):
///   0 voltage_level_kv        1 peak_base_load_kw    2 peak_ev_load_kw
///   3 total_transformer_capacity_kva
///   4-6 transformer counts by phase count (1, 2, 3)
///   7-9 line counts by phase count (1, 2, 3)
///   10-13 connected peak kW by customer class (residential, commercial,
///         industrial, mixed)
struct FeederFeatures {
    static constexpr int kDim = 14;

    std::string feeder_id;
    double voltage_level_kv = 0.0;
    double peak_base_load_kw = 0.0;
    double peak_ev_load_kw = 0.0;
    double total_transformer_capacity_kva = 0.0;
    std::array<int, 3> transformer_phase_counts{}; // [0]=1-phase .. [2]=3-phase
    std::array<int, 3> line_phase_counts{};
    std::array<double, 4> class_load_kw{}; // CustomerClass enum order

    std::array<double, kDim> flatten() const;
    static const std::array<std::string, kDim>& field_names();
};

/// Computes the descriptor for one feeder. Base-load peak is the maximum
/// hourly sum of peak_kw * profile shape across all three representative
/// days; EV peak is taken from the supplied per-day unmanaged aggregate
/// (the strategy-independent baseline). Missing profiles raise ConfigError.
FeederFeatures extract_features(const Feeder& feeder, const ProfileStore& profiles,
                                const std::map<DayType, std::array<double, 24>>& unmanaged_ev_kw);

std::vector<FeederFeatures> load_features(const std::filesystem::path& path);
void save_features(const std::vector<FeederFeatures>& rows, const std::filesystem::path& path);

/// z-score + principal components. `mean`/`scale` cover every raw feature;
/// constant features are dropped from the projection (their indices land in
/// `dropped`) and reconstructed at their mean. Component rows are orthonormal
/// and sign-fixed so the largest-magnitude coefficient is positive.
struct PcaModel {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<int> kept;    // raw indices that vary
    std::vector<int> dropped; // raw indices with zero variance
    std::vector<std::vector<double>> components;    // retained rows x kept.size()
    std::vector<double> explained_variance_ratio;   // per retained row
    std::vector<double> all_variance_ratio;         // per kept dimension, descending

    std::size_t input_dim() const { return mean.size(); }
    std::size_t reduced_dim() const { return components.size(); }

    std::vector<double> transform(const std::vector<double>& raw) const;
    std::vector<double> inverse_transform(const std::vector<double>& reduced) const;
};

/// Fits z-score + PCA on the rows and keeps the smallest component count
/// whose cumulative explained variance reaches `variance_target`. Needs at
/// least two rows of equal width.
PcaModel fit_pca(const std::vector<std::vector<double>>& rows, double variance_target = 0.95);

struct ClusterModel {
    int k = 0;
    std::uint64_t seed = 0;
    double wcss = 0.0;
    std::vector<double> wcss_trace; // objective after each assignment pass (winning run)
    std::vector<std::vector<double>> centroids; // PCA space
    std::vector<int> assignment;                // by point index
    std::vector<std::string> ids;               // per point; filled by cluster_feeders

    std::map<std::string, int> assignments() const; // feeder_id -> cluster
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
/// final WCSS. Deterministic for a fixed seed. k must be in [1, points].
ClusterModel kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts = 10);

struct ElbowResult {
    int k = 0;                   // chosen: maximum second difference of WCSS
    std::vector<int> k_values;   // the candidates, ascending
    std::vector<double> wcss;    // fitted curve, same order
};

/// Runs kmeans over an ascending k range (at least 3 candidates, so the
/// discrete curvature is defined) and picks the knee. Ties go to the
/// smallest k.
ElbowResult elbow_select(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& k_range, std::uint64_t seed, int restarts = 10);

/// Per cluster, the member nearest its centroid (Euclidean, PCA space),
/// ties broken by lexicographically smaller id. Empty clusters yield
/// nullopt. The model must carry ids.
std::vector<std::optional<std::string>> select_representatives(
    const ClusterModel& model, const std::vector<std::vector<double>>& points);

struct ClusterReportRow {
    std::string feeder_id;
    int cluster = 0;
    double distance_to_centroid = 0.0;
    bool is_representative = false;
};

/// Full pipeline artifact: standardize + project, elbow-select k, fit the
/// final model, pick representatives.
struct ClusteringRun {
    PcaModel pca;
    ElbowResult elbow;
    ClusterModel model;
    std::vector<std::vector<double>> points; // PCA coordinates, feeder order
    std::vector<std::optional<std::string>> representatives; // per cluster

    std::vector<ClusterReportRow> report() const; // rows in feeder order
};

ClusteringRun cluster_feeders(const std::vector<FeederFeatures>& features,
                              const std::vector<int>& k_range, std::uint64_t seed,
                              double variance_target = 0.95, int restarts = 10);

std::vector<ClusterReportRow> load_cluster_report(const std::filesystem::path& path);
void save_cluster_report(const std::vector<ClusterReportRow>& rows,
                         const std::filesystem::path& path);

} // namespace evgrid
