#include "evgrid/clustering.hpp"

#include "evgrid/csv.hpp"
#include "evgrid/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace evgrid {

namespace {

constexpr std::array<DayType, 3> kAllDays = {DayType::winter, DayType::summer,
                                             DayType::shoulder};

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double to_num(const std::string& field, const std::string& cell, const std::string& context) {
    try {
        std::size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ParseError(context + ": bad value for " + field + ": '" + cell + "'");
    }
}

double nonneg(const std::string& field, double v, const std::string& context) {
    if (v < 0.0) throw ParseError(context + ": " + field + " must be >= 0");
    return v;
}

} // namespace

std::array<double, FeederFeatures::kDim> FeederFeatures::flatten() const {
    return {voltage_level_kv,
            peak_base_load_kw,
            peak_ev_load_kw,
            total_transformer_capacity_kva,
            static_cast<double>(transformer_phase_counts[0]),
            static_cast<double>(transformer_phase_counts[1]),
            static_cast<double>(transformer_phase_counts[2]),
            static_cast<double>(line_phase_counts[0]),
            static_cast<double>(line_phase_counts[1]),
            static_cast<double>(line_phase_counts[2]),
            class_load_kw[0],
            class_load_kw[1],
            class_load_kw[2],
            class_load_kw[3]};
}

const std::array<std::string, FeederFeatures::kDim>& FeederFeatures::field_names() {
    static const std::array<std::string, kDim> names = {
        "voltage_level_kv", "peak_base_load_kw", "peak_ev_load_kw",
        "total_transformer_capacity_kva", "tx_1ph", "tx_2ph", "tx_3ph",
        "line_1ph", "line_2ph", "line_3ph", "residential_kw", "commercial_kw",
        "industrial_kw", "mixed_kw"};
    return names;
}

FeederFeatures extract_features(const Feeder& feeder, const ProfileStore& profiles,
                                const std::map<DayType, std::array<double, 24>>& unmanaged_ev_kw) {
    FeederFeatures f;
    f.feeder_id = feeder.id;
    if (const Bus* src = feeder.source_bus()) f.voltage_level_kv = src->nominal_voltage_kv;

    for (DayType day : kAllDays) {
        for (int h = 0; h < 24; ++h) {
            double total = 0.0;
            for (const auto& ld : feeder.loads)
                total += ld.peak_kw * profiles.get(ld.profile_id, day).shape[h];
            f.peak_base_load_kw = std::max(f.peak_base_load_kw, total);
        }
    }
    for (const auto& [day, curve] : unmanaged_ev_kw)
        for (double kw : curve) f.peak_ev_load_kw = std::max(f.peak_ev_load_kw, kw);

    for (const auto& tx : feeder.transformers) {
        f.total_transformer_capacity_kva += tx.rating_kva;
        f.transformer_phase_counts[tx.phase_count - 1] += 1;
    }
    for (const auto& ln : feeder.lines) f.line_phase_counts[ln.phases.count() - 1] += 1;
    for (const auto& ld : feeder.loads)
        f.class_load_kw[static_cast<int>(ld.customer_class)] += ld.peak_kw;
    return f;
}

std::vector<FeederFeatures> load_features(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const auto& names = FeederFeatures::field_names();
    std::vector<int> col(names.size());
    int id_col = t.column("feeder_id");
    if (id_col < 0) throw ParseError(path.string() + ": missing column feeder_id");
    for (std::size_t j = 0; j < names.size(); ++j) {
        col[j] = t.column(names[j]);
        if (col[j] < 0) throw ParseError(path.string() + ": missing column " + names[j]);
    }

    std::vector<FeederFeatures> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        std::string ctx = path.string() + " row " + std::to_string(r + 1);
        FeederFeatures f;
        f.feeder_id = row[id_col];
        std::array<double, FeederFeatures::kDim> v{};
        for (std::size_t j = 0; j < names.size(); ++j)
            v[j] = nonneg(names[j], to_num(names[j], row[col[j]], ctx), ctx);
        f.voltage_level_kv = v[0];
        f.peak_base_load_kw = v[1];
        f.peak_ev_load_kw = v[2];
        f.total_transformer_capacity_kva = v[3];
        for (int p = 0; p < 3; ++p) {
            f.transformer_phase_counts[p] = static_cast<int>(v[4 + p]);
            f.line_phase_counts[p] = static_cast<int>(v[7 + p]);
        }
        for (int c = 0; c < 4; ++c) f.class_load_kw[c] = v[10 + c];
        out.push_back(std::move(f));
    }
    return out;
}

void save_features(const std::vector<FeederFeatures>& rows, const std::filesystem::path& path) {
    CsvWriter w(path);
    std::vector<std::string> header = {"feeder_id"};
    for (const auto& n : FeederFeatures::field_names()) header.push_back(n);
    w.row(header);
    for (const auto& f : rows) {
        std::vector<std::string> cells = {f.feeder_id};
        for (double v : f.flatten()) cells.push_back(fmt_double(v));
        w.row(cells);
    }
}

PcaModel fit_pca(const std::vector<std::vector<double>>& rows, double variance_target) {
    const std::size_t n = rows.size();
    if (n < 2) throw ConfigError("pca needs at least 2 samples, got " + std::to_string(n));
    if (!(variance_target > 0.0 && variance_target <= 1.0))
        throw ConfigError("pca variance target must be in (0, 1]");
    const std::size_t d = rows[0].size();
    for (const auto& r : rows)
        if (r.size() != d) throw ConfigError("pca rows have inconsistent widths");

    PcaModel m;
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 1.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += r[j];
    for (std::size_t j = 0; j < d; ++j) m.mean[j] /= static_cast<double>(n);

    for (std::size_t j = 0; j < d; ++j) {
        double var = 0.0;
        for (const auto& r : rows) {
            double c = r[j] - m.mean[j];
            var += c * c;
        }
        var /= static_cast<double>(n);
        double sd = std::sqrt(var);
        // constant within float noise: the column carries no information
        if (sd < 1e-12 * std::max(1.0, std::abs(m.mean[j]))) {
            m.dropped.push_back(static_cast<int>(j));
        } else {
            m.kept.push_back(static_cast<int>(j));
            m.scale[j] = sd;
        }
    }
    const std::size_t md = m.kept.size();
    if (md == 0) throw ConfigError("pca: every feature is constant");

    Eigen::MatrixXd z(n, md);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < md; ++j) {
            int raw = m.kept[j];
            z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                (rows[i][raw] - m.mean[raw]) / m.scale[raw];
        }
    Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw SolveError("pca eigendecomposition failed");

    // Eigen returns ascending eigenvalues; walk them backwards.
    std::vector<double> lambda(md);
    double total = 0.0;
    for (std::size_t j = 0; j < md; ++j) {
        double v = eig.eigenvalues()(static_cast<Eigen::Index>(md - 1 - j));
        lambda[j] = std::max(v, 0.0);
        total += lambda[j];
    }
    m.all_variance_ratio.resize(md);
    for (std::size_t j = 0; j < md; ++j) m.all_variance_ratio[j] = lambda[j] / total;

    std::size_t retained = md;
    double cum = 0.0;
    for (std::size_t j = 0; j < md; ++j) {
        cum += m.all_variance_ratio[j];
        if (cum >= variance_target - 1e-12) {
            retained = j + 1;
            break;
        }
    }

    for (std::size_t j = 0; j < retained; ++j) {
        Eigen::VectorXd col = eig.eigenvectors().col(static_cast<Eigen::Index>(md - 1 - j));
        // sign convention: the largest-magnitude coefficient points positive
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col(arg) < 0.0) col = -col;
        m.components.emplace_back(col.data(), col.data() + md);
        m.explained_variance_ratio.push_back(m.all_variance_ratio[j]);
    }
    return m;
}

std::vector<double> PcaModel::transform(const std::vector<double>& raw) const {
    if (raw.size() != input_dim())
        throw ConfigError("pca transform: expected " + std::to_string(input_dim()) +
                          " features, got " + std::to_string(raw.size()));
    std::vector<double> out(reduced_dim(), 0.0);
    for (std::size_t c = 0; c < components.size(); ++c)
        for (std::size_t j = 0; j < kept.size(); ++j) {
            int r = kept[j];
            out[c] += components[c][j] * (raw[r] - mean[r]) / scale[r];
        }
    return out;
}

std::vector<double> PcaModel::inverse_transform(const std::vector<double>& reduced) const {
    if (reduced.size() != reduced_dim())
        throw ConfigError("pca inverse: expected " + std::to_string(reduced_dim()) +
                          " components, got " + std::to_string(reduced.size()));
    std::vector<double> raw(mean); // dropped features reconstruct at their mean
    for (std::size_t j = 0; j < kept.size(); ++j) {
        double zj = 0.0;
        for (std::size_t c = 0; c < components.size(); ++c)
            zj += components[c][j] * reduced[c];
        int r = kept[j];
        raw[r] = mean[r] + zj * scale[r];
    }
    return raw;
}

std::map<std::string, int> ClusterModel::assignments() const {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = assignment[i];
    return out;
}

namespace {

struct LloydRun {
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment;
    std::vector<double> trace;
    double wcss = 0.0;
};

int nearest_centroid(const std::vector<double>& p,
                     const std::vector<std::vector<double>>& centroids) {
    int best = 0;
    double best_d = dist2(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        double d = dist2(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

LloydRun lloyd_once(const std::vector<std::vector<double>>& pts, int k, Rng& rng) {
    const std::size_t n = pts.size();
    const std::size_t dim = pts[0].size();

    // k-means++ seeding
    LloydRun run;
    run.centroids.push_back(pts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1))]);
    std::vector<double> d2(n);
    while (run.centroids.size() < static_cast<std::size_t>(k)) {
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = dist2(pts[i], run.centroids[0]);
            for (std::size_t c = 1; c < run.centroids.size(); ++c)
                d2[i] = std::min(d2[i], dist2(pts[i], run.centroids[c]));
        }
        run.centroids.push_back(pts[rng.pick_weighted(d2)]);
    }

    auto assign_pass = [&](bool& changed) {
        double obj = 0.0;
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int c = nearest_centroid(pts[i], run.centroids);
            obj += dist2(pts[i], run.centroids[static_cast<std::size_t>(c)]);
            if (c != run.assignment[i]) {
                run.assignment[i] = c;
                changed = true;
            }
        }
        return obj;
    };

    run.assignment.assign(n, -1);
    bool changed = false;
    run.trace.push_back(assign_pass(changed));

    for (int iter = 0; iter < 300; ++iter) {
        // update step: centroid = mean of members; an empty cluster restarts
        // at the point farthest from its current centroid
        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                              std::vector<double>(dim, 0.0));
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = static_cast<std::size_t>(run.assignment[i]);
            counts[c] += 1;
            for (std::size_t j = 0; j < dim; ++j) sums[c][j] += pts[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = dist2(pts[i], run.centroids[static_cast<std::size_t>(run.assignment[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                run.centroids[static_cast<std::size_t>(c)] = pts[far];
            } else {
                for (std::size_t j = 0; j < dim; ++j)
                    run.centroids[static_cast<std::size_t>(c)][j] =
                        sums[static_cast<std::size_t>(c)][j] / counts[c];
            }
        }

        run.trace.push_back(assign_pass(changed));
        if (!changed) break;
    }

    run.wcss = run.trace.back();
    return run;
}

} // namespace

ClusterModel kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                    int restarts) {
    if (points.empty()) throw ConfigError("kmeans: no points");
    if (k < 1 || static_cast<std::size_t>(k) > points.size())
        throw ConfigError("kmeans: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(points.size()) + "]");
    if (restarts < 1) throw ConfigError("kmeans: restarts must be >= 1");

    Rng rng(mix64(seed ^ 0x6b6d65616e73ull)); // "kmeans"
    LloydRun best;
    for (int r = 0; r < restarts; ++r) {
        LloydRun run = lloyd_once(points, k, rng);
        if (r == 0 || run.wcss < best.wcss) best = std::move(run);
    }

    ClusterModel m;
    m.k = k;
    m.seed = seed;
    m.wcss = best.wcss;
    m.wcss_trace = std::move(best.trace);
    m.centroids = std::move(best.centroids);
    m.assignment = std::move(best.assignment);
    return m;
}

ElbowResult elbow_select(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& k_range, std::uint64_t seed, int restarts) {
    if (k_range.size() < 3)
        throw ConfigError("elbow needs at least 3 candidate k values (curvature undefined)");
    for (std::size_t i = 0; i + 1 < k_range.size(); ++i)
        if (k_range[i] >= k_range[i + 1]) throw ConfigError("elbow k range must be ascending");

    ElbowResult res;
    res.k_values = k_range;
    for (int k : k_range) res.wcss.push_back(kmeans(points, k, seed, restarts).wcss);

    // knee = largest second difference; ties go to the smallest k
    std::size_t best = 1;
    double best_curv = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < res.wcss.size(); ++i) {
        double curv = res.wcss[i - 1] - 2.0 * res.wcss[i] + res.wcss[i + 1];
        if (curv > best_curv) {
            best_curv = curv;
            best = i;
        }
    }
    res.k = res.k_values[best];
    return res;
}

std::vector<std::optional<std::string>> select_representatives(
    const ClusterModel& model, const std::vector<std::vector<double>>& points) {
    if (model.ids.size() != points.size())
        throw ConfigError("representative selection needs one feeder id per point");
    std::vector<std::optional<std::string>> reps(static_cast<std::size_t>(model.k));
    std::vector<double> best_d(static_cast<std::size_t>(model.k),
                               std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto c = static_cast<std::size_t>(model.assignment[i]);
        double d = dist2(points[i], model.centroids[c]);
        if (d < best_d[c] || (d == best_d[c] && reps[c] && model.ids[i] < *reps[c])) {
            best_d[c] = d;
            reps[c] = model.ids[i];
        }
    }
    return reps;
}

std::vector<ClusterReportRow> ClusteringRun::report() const {
    std::vector<ClusterReportRow> rows;
    for (std::size_t i = 0; i < model.ids.size(); ++i) {
        ClusterReportRow r;
        r.feeder_id = model.ids[i];
        r.cluster = model.assignment[i];
        r.distance_to_centroid =
            std::sqrt(dist2(points[i], model.centroids[static_cast<std::size_t>(r.cluster)]));
        auto& rep = representatives[static_cast<std::size_t>(r.cluster)];
        r.is_representative = rep && *rep == r.feeder_id;
        rows.push_back(std::move(r));
    }
    return rows;
}

ClusteringRun cluster_feeders(const std::vector<FeederFeatures>& features,
                              const std::vector<int>& k_range, std::uint64_t seed,
                              double variance_target, int restarts) {
    std::set<std::string> ids;
    for (const auto& f : features)
        if (!ids.insert(f.feeder_id).second)
            throw ConfigError("duplicate feeder id in features: " + f.feeder_id);

    std::vector<std::vector<double>> raw;
    for (const auto& f : features) {
        auto v = f.flatten();
        raw.emplace_back(v.begin(), v.end());
    }

    ClusteringRun run;
    run.pca = fit_pca(raw, variance_target);
    for (const auto& r : raw) run.points.push_back(run.pca.transform(r));

    run.elbow = elbow_select(run.points, k_range, seed, restarts);
    run.model = kmeans(run.points, run.elbow.k, seed, restarts);
    for (const auto& f : features) run.model.ids.push_back(f.feeder_id);
    run.representatives = select_representatives(run.model, run.points);
    return run;
}

std::vector<ClusterReportRow> load_cluster_report(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    int c_id = t.column("feeder_id");
    int c_cl = t.column("cluster");
    int c_d = t.column("distance_to_centroid");
    int c_rep = t.column("is_representative");
    if (c_id < 0 || c_cl < 0 || c_d < 0 || c_rep < 0)
        throw ParseError(path.string() + ": missing cluster report columns");
    std::vector<ClusterReportRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        std::string ctx = path.string() + " row " + std::to_string(i + 1);
        ClusterReportRow r;
        r.feeder_id = t.rows[i][c_id];
        r.cluster = static_cast<int>(to_num("cluster", t.rows[i][c_cl], ctx));
        r.distance_to_centroid =
            nonneg("distance_to_centroid",
                   to_num("distance_to_centroid", t.rows[i][c_d], ctx), ctx);
        r.is_representative = t.rows[i][c_rep] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

void save_cluster_report(const std::vector<ClusterReportRow>& rows,
                         const std::filesystem::path& path) {
    CsvWriter w(path);
    w.row({"feeder_id", "cluster", "distance_to_centroid", "is_representative"});
    for (const auto& r : rows)
        w.row({r.feeder_id, std::to_string(r.cluster), fmt_double(r.distance_to_centroid),
               r.is_representative ? "1" : "0"});
}

} // namespace evgrid
