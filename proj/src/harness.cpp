#include "cmreduce/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "cmreduce/detail/tones.hpp"
#include "cmreduce/errors.hpp"
#include "cmreduce/rng.hpp"

namespace cmr {

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kCsvHeader =
    "symbol_index,seed,eta_before,eta_after,srcm_db_before,srcm_db_after,elapsed_ns";

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("CMREDUCE_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) {
            return static_cast<unsigned>(v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for_index(std::size_t count, unsigned workers,
                        const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) {
                return;
            }
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next.store(count); // stop handing out work
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n_threads = static_cast<unsigned>(
        std::min<std::size_t>(workers, count));
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

double mean_pow2(const TimeSignal& sig) {
    double acc = 0.0;
    for (const auto& s : sig.samples) {
        acc += std::norm(s);
    }
    return acc / static_cast<double>(sig.samples.size());
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    return fields;
}

double parse_double_field(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw schema_error("results csv: bad numeric field '" + s + "'");
    }
    return v;
}

std::uint64_t parse_u64_field(const std::string& s) {
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') {
        throw schema_error("results csv: bad integer field '" + s + "'");
    }
    return v;
}

} // namespace

Reducer parse_reducer(std::string_view id) {
    if (id == "none") return Reducer::None;
    if (id == "ce") return Reducer::Ce;
    if (id == "slm") return Reducer::Slm;
    if (id == "exhaustive") return Reducer::Exhaustive;
    throw config_error("unknown reducer '" + std::string(id) +
                       "' (expected none, ce, slm or exhaustive)");
}

std::string to_string(Reducer r) {
    switch (r) {
        case Reducer::None: return "none";
        case Reducer::Ce: return "ce";
        case Reducer::Slm: return "slm";
        case Reducer::Exhaustive: return "exhaustive";
    }
    throw config_error("invalid reducer enum value");
}

void ExperimentConfig::validate() const {
    if (n_subcarriers < 1) {
        throw config_error("experiment: n_subcarriers must be >= 1");
    }
    if (oversampling < 2) {
        throw config_error("experiment: oversampling must be >= 2");
    }
    if (n_fixed > n_subcarriers) {
        throw config_error("experiment: n_fixed must not exceed n_subcarriers");
    }
    if (n_symbols < 1) {
        throw config_error("experiment: n_symbols must be >= 1");
    }
    if (reducer == Reducer::Slm && slm.candidates < 1) {
        throw config_error("experiment: slm candidate count must be >= 1");
    }
    if (reducer == Reducer::Exhaustive && n_subcarriers - n_fixed > 20) {
        throw config_error("experiment: exhaustive reducer supports at most 20 selectable signs");
    }
    if (cm && cm->k_slp == 0.0) {
        throw config_error("experiment: cm k_slp must be nonzero");
    }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned workers) {
    cfg.validate();
    const Constellation full = build_constellation(cfg.scheme);
    const HalfConstellation half = half_constellation(full);

    ExperimentResult result;
    result.config = cfg;
    result.records.resize(cfg.n_symbols);
    std::vector<double> m2_before(cfg.n_symbols);
    std::vector<double> m2_after(cfg.n_symbols);

    auto process = [&](std::size_t i) {
        const std::uint64_t seed = per_symbol_seed(cfg.master_seed, i);
        std::mt19937_64 rng(seed);
        const auto symbols = draw_frame(full, half, cfg.n_subcarriers, cfg.n_fixed, rng);
        const auto ref_signs = draw_signs(cfg.n_subcarriers, cfg.n_fixed, rng);

        SignProblem prob{symbols, cfg.n_fixed, cfg.oversampling, full.sigma_b_sq};
        const TimeSignal before = synthesize(prob.frame_with_signs(ref_signs));
        const double eta_before = srcm(before);
        m2_before[i] = mean_pow2(before);

        double eta_after = eta_before;
        const auto t0 = std::chrono::steady_clock::now();
        switch (cfg.reducer) {
            case Reducer::None:
                m2_after[i] = m2_before[i];
                break;
            case Reducer::Ce: {
                const auto outcome = ce_reduce(prob, cfg.variant);
                eta_after = srcm(outcome.signal);
                m2_after[i] = mean_pow2(outcome.signal);
                break;
            }
            case Reducer::Slm: {
                SlmConfig slm_cfg = cfg.slm;
                slm_cfg.seed = rng(); // per-symbol candidate stream
                const auto outcome = slm_reduce(prob.frame_with_signs(ref_signs), slm_cfg);
                eta_after = outcome.eta;
                m2_after[i] = mean_pow2(synthesize(outcome.best));
                break;
            }
            case Reducer::Exhaustive: {
                const auto outcome = exhaustive_sign_search(prob);
                eta_after = outcome.eta_min;
                m2_after[i] = mean_pow2(synthesize(prob.frame_with_signs(outcome.signs)));
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();

        SymbolRecord& rec = result.records[i];
        rec.index = i;
        rec.seed = seed;
        rec.eta_before = eta_before;
        rec.eta_after = eta_after;
        rec.srcm_db_before = srcm_db(eta_before);
        rec.srcm_db_after = srcm_db(eta_after);
        rec.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    };

    parallel_for_index(cfg.n_symbols, resolve_workers(workers), process);

    // Fold pooled moments in index order so the result is independent of the
    // worker count.
    const std::uint64_t samples_per_symbol =
        static_cast<std::uint64_t>(cfg.n_subcarriers) * static_cast<std::uint64_t>(cfg.oversampling);
    for (std::size_t i = 0; i < cfg.n_symbols; ++i) {
        result.pooled_before.add_means(m2_before[i], result.records[i].eta_before,
                                       samples_per_symbol);
        result.pooled_after.add_means(m2_after[i], result.records[i].eta_after,
                                      samples_per_symbol);
    }
    return result;
}

CcdfTable ccdf(std::span<const double> values_db, std::size_t n_points) {
    if (values_db.empty()) {
        throw std::invalid_argument("ccdf: values must be nonempty");
    }
    if (n_points < 2) {
        throw std::invalid_argument("ccdf: need at least two threshold points");
    }
    const auto [min_it, max_it] = std::minmax_element(values_db.begin(), values_db.end());
    const double lo = *min_it;
    const double hi = *max_it;

    std::vector<double> sorted(values_db.begin(), values_db.end());
    std::sort(sorted.begin(), sorted.end());

    CcdfTable table;
    if (lo == hi) {
        table.points.push_back({lo, 0.0});
        return table;
    }
    table.points.reserve(n_points);
    const double step = (hi - lo) / static_cast<double>(n_points - 1);
    for (std::size_t k = 0; k < n_points; ++k) {
        const double threshold = (k + 1 == n_points) ? hi : lo + step * static_cast<double>(k);
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold);
        table.points.push_back(
            {threshold, static_cast<double>(above) / static_cast<double>(sorted.size())});
    }
    return table;
}

Summary summarize(const ExperimentResult& result) {
    const auto& records = result.records;
    if (records.empty()) {
        throw std::invalid_argument("summarize: result holds no records");
    }
    Summary s;
    s.n_symbols = records.size();
    const Constellation full = build_constellation(result.config.scheme);
    s.rate_loss = rate_loss(result.config.n_subcarriers - result.config.n_fixed,
                            result.config.n_subcarriers, full.points.size());

    double sum_db_before = 0.0;
    double sum_db_after = 0.0;
    double max_eta_after = records.front().eta_after;
    std::size_t above6 = 0;
    for (const auto& r : records) {
        sum_db_before += r.srcm_db_before;
        sum_db_after += r.srcm_db_after;
        max_eta_after = std::max(max_eta_after, r.eta_after);
        if (r.eta_after > 6.0) {
            ++above6;
        }
    }
    s.mean_srcm_db_before = sum_db_before / static_cast<double>(records.size());
    s.mean_srcm_db_after = sum_db_after / static_cast<double>(records.size());
    s.max_eta_after = max_eta_after;
    s.max_srcm_db_after = srcm_db(max_eta_after);
    s.frac_eta_after_above_6 = static_cast<double>(above6) / static_cast<double>(records.size());
    s.rcm_db_before = result.pooled_before.rcm_db();
    s.rcm_db_after = result.pooled_after.rcm_db();
    if (result.config.cm) {
        s.cm_db_before = cm_db(s.rcm_db_before, *result.config.cm);
        s.cm_db_after = cm_db(s.rcm_db_after, *result.config.cm);
    }
    return s;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j{
        {"schema_version", kSchemaVersion},
        {"n_subcarriers", cfg.n_subcarriers},
        {"oversampling", cfg.oversampling},
        {"scheme", to_string(cfg.scheme)},
        {"n_fixed", cfg.n_fixed},
        {"reducer", to_string(cfg.reducer)},
        {"variant", to_string(cfg.variant)},
        {"n_symbols", cfg.n_symbols},
        {"master_seed", cfg.master_seed},
    };
    if (cfg.reducer == Reducer::Slm) {
        j["slm"] = {{"candidates", cfg.slm.candidates},
                    {"alphabet", to_string(cfg.slm.alphabet)},
                    {"seed", cfg.slm.seed}};
    }
    if (cfg.cm) {
        j["cm_params"] = {{"rcm_ref_db", cfg.cm->rcm_ref_db},
                          {"k_slp", cfg.cm->k_slp},
                          {"k_bw", cfg.cm->k_bw}};
    }
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    try {
        ExperimentConfig cfg;
        if (j.contains("schema_version") &&
            j.at("schema_version").get<int>() != kSchemaVersion) {
            throw schema_error("config: unsupported schema_version");
        }
        if (j.contains("n_subcarriers")) cfg.n_subcarriers = j.at("n_subcarriers").get<std::size_t>();
        if (j.contains("oversampling")) cfg.oversampling = j.at("oversampling").get<int>();
        if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
        if (j.contains("n_fixed")) cfg.n_fixed = j.at("n_fixed").get<std::size_t>();
        if (j.contains("reducer")) cfg.reducer = parse_reducer(j.at("reducer").get<std::string>());
        if (j.contains("variant")) cfg.variant = parse_variant(j.at("variant").get<std::string>());
        if (j.contains("n_symbols")) cfg.n_symbols = j.at("n_symbols").get<std::size_t>();
        if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("slm")) {
            const auto& s = j.at("slm");
            if (s.contains("candidates")) cfg.slm.candidates = s.at("candidates").get<std::size_t>();
            if (s.contains("alphabet"))
                cfg.slm.alphabet = parse_alphabet(s.at("alphabet").get<std::string>());
            if (s.contains("seed")) cfg.slm.seed = s.at("seed").get<std::uint64_t>();
        }
        if (j.contains("cm_params")) {
            const auto& c = j.at("cm_params");
            CmParams p;
            p.rcm_ref_db = c.at("rcm_ref_db").get<double>();
            p.k_slp = c.at("k_slp").get<double>();
            p.k_bw = c.value("k_bw", 0.0);
            cfg.cm = p;
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("config json: ") + e.what());
    }
}

void persist(const ExperimentResult& result, const std::filesystem::path& stem) {
    const auto csv_path = std::filesystem::path(stem).concat(".csv");
    const auto summary_path = std::filesystem::path(stem).concat(".summary.json");

    {
        std::ofstream csv(csv_path);
        if (!csv) {
            throw std::runtime_error("persist: cannot open " + csv_path.string());
        }
        csv << "# schema_version=" << kSchemaVersion << "\n" << kCsvHeader << "\n";
        for (const auto& r : result.records) {
            csv << r.index << ',' << r.seed << ',' << format_double(r.eta_before) << ','
                << format_double(r.eta_after) << ',' << format_double(r.srcm_db_before) << ','
                << format_double(r.srcm_db_after) << ',' << r.elapsed_ns << "\n";
        }
        if (!csv) {
            throw std::runtime_error("persist: write failed for " + csv_path.string());
        }
    }

    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["config"] = config_to_json(result.config);
    j["pooled"] = {
        {"sample_count", result.pooled_before.sample_count()},
        {"sum_pow2_before", result.pooled_before.sum_pow2()},
        {"sum_pow6_before", result.pooled_before.sum_pow6()},
        {"sum_pow2_after", result.pooled_after.sum_pow2()},
        {"sum_pow6_after", result.pooled_after.sum_pow6()},
    };
    const Summary s = summarize(result);
    nlohmann::json agg{
        {"n_symbols", s.n_symbols},
        {"rate_loss", s.rate_loss},
        {"rcm_db_before", s.rcm_db_before},
        {"rcm_db_after", s.rcm_db_after},
        {"mean_srcm_db_before", s.mean_srcm_db_before},
        {"mean_srcm_db_after", s.mean_srcm_db_after},
        {"max_srcm_db_after", s.max_srcm_db_after},
        {"max_eta_after", s.max_eta_after},
        {"frac_eta_after_above_6", s.frac_eta_after_above_6},
    };
    if (s.cm_db_before) {
        agg["cm_db_before"] = *s.cm_db_before;
        agg["cm_db_after"] = *s.cm_db_after;
    }
    std::vector<double> before_db(result.records.size());
    std::vector<double> after_db(result.records.size());
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        before_db[i] = result.records[i].srcm_db_before;
        after_db[i] = result.records[i].srcm_db_after;
    }
    const std::size_t ccdf_points = std::min<std::size_t>(101, std::max<std::size_t>(2, result.records.size()));
    for (const char* key : {"ccdf_before", "ccdf_after"}) {
        const auto table = ccdf(key == std::string_view("ccdf_before") ? before_db : after_db,
                                ccdf_points);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& pt : table.points) {
            rows.push_back({pt.threshold_db, pt.probability});
        }
        agg[key] = rows;
    }
    j["aggregates"] = agg;

    std::ofstream summary(summary_path);
    if (!summary) {
        throw std::runtime_error("persist: cannot open " + summary_path.string());
    }
    summary << j.dump(2) << "\n";
    if (!summary) {
        throw std::runtime_error("persist: write failed for " + summary_path.string());
    }
}

ExperimentResult load(const std::filesystem::path& stem) {
    const auto csv_path = std::filesystem::path(stem).concat(".csv");
    const auto summary_path = std::filesystem::path(stem).concat(".summary.json");

    std::ifstream summary(summary_path);
    if (!summary) {
        throw std::runtime_error("load: cannot open " + summary_path.string());
    }
    nlohmann::json j;
    try {
        summary >> j;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("summary json: ") + e.what());
    }
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion) {
        throw schema_error("summary json: missing or unsupported schema_version");
    }

    ExperimentResult result;
    result.config = config_from_json(j.at("config"));
    try {
        const auto& pooled = j.at("pooled");
        const auto count = pooled.at("sample_count").get<std::uint64_t>();
        result.pooled_before = PooledMoments::from_sums(
            pooled.at("sum_pow2_before").get<double>(),
            pooled.at("sum_pow6_before").get<double>(), count);
        result.pooled_after = PooledMoments::from_sums(
            pooled.at("sum_pow2_after").get<double>(),
            pooled.at("sum_pow6_after").get<double>(), count);
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("summary json pooled moments: ") + e.what());
    }

    std::ifstream csv(csv_path);
    if (!csv) {
        throw std::runtime_error("load: cannot open " + csv_path.string());
    }
    std::string line;
    if (!std::getline(csv, line) || line.rfind("# schema_version=", 0) != 0) {
        throw schema_error("results csv: missing schema_version header");
    }
    if (std::strtol(line.c_str() + 17, nullptr, 10) != kSchemaVersion) {
        throw schema_error("results csv: unsupported schema_version");
    }
    if (!std::getline(csv, line) || line != kCsvHeader) {
        throw schema_error("results csv: unexpected column header");
    }
    while (std::getline(csv, line)) {
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 7) {
            throw schema_error("results csv: expected 7 fields per row");
        }
        SymbolRecord r;
        r.index = parse_u64_field(fields[0]);
        r.seed = parse_u64_field(fields[1]);
        r.eta_before = parse_double_field(fields[2]);
        r.eta_after = parse_double_field(fields[3]);
        r.srcm_db_before = parse_double_field(fields[4]);
        r.srcm_db_after = parse_double_field(fields[5]);
        r.elapsed_ns = static_cast<std::int64_t>(parse_u64_field(fields[6]));
        result.records.push_back(r);
    }
    return result;
}

void write_ccdf_csv(const CcdfTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_ccdf_csv: cannot open " + path.string());
    }
    out << "threshold_db,prob\n";
    for (const auto& pt : table.points) {
        out << format_double(pt.threshold_db) << ',' << format_double(pt.probability) << "\n";
    }
    if (!out) {
        throw std::runtime_error("write_ccdf_csv: write failed for " + path.string());
    }
}

std::vector<VarianceCheckPoint> conditional_variance_profile(Scheme scheme, std::size_t n,
                                                             int oversampling,
                                                             std::span<const double> alphas,
                                                             std::size_t n_frames,
                                                             std::uint64_t master_seed) {
    if (n < 1 || oversampling < 2 || n_frames < 1 || alphas.empty()) {
        throw std::invalid_argument("conditional_variance_profile: bad arguments");
    }
    const Constellation full = build_constellation(scheme);
    const HalfConstellation half = half_constellation(full);
    const std::size_t total = n * static_cast<std::size_t>(oversampling);
    const auto w = detail::unit_tone_table(total);
    const double scale = 1.0 / (full.sigma_b_sq * static_cast<double>(n));

    // Decided-sign count per alpha; the conditional variance depends only on
    // which indices remain random, not on the decided values.
    std::vector<std::pair<std::size_t, std::size_t>> cuts; // (j, output slot)
    std::vector<VarianceCheckPoint> out(alphas.size());
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        if (alphas[a] < 0.0 || alphas[a] > 1.0) {
            throw std::invalid_argument("conditional_variance_profile: alpha must be in [0,1]");
        }
        out[a].alpha = alphas[a];
        cuts.emplace_back(static_cast<std::size_t>(std::llround(alphas[a] * static_cast<double>(n))), a);
    }
    std::sort(cuts.begin(), cuts.end(), [](auto lhs, auto rhs) { return lhs.first > rhs.first; });

    std::vector<double> acc_rr(total), acc_ii(total), acc_ri(total);
    std::vector<cxd> tone(total);
    for (std::size_t f = 0; f < n_frames; ++f) {
        std::mt19937_64 rng(per_symbol_seed(master_seed, f));
        const auto symbols = draw_frame(full, half, n, 0, rng);
        std::fill(acc_rr.begin(), acc_rr.end(), 0.0);
        std::fill(acc_ii.begin(), acc_ii.end(), 0.0);
        std::fill(acc_ri.begin(), acc_ri.end(), 0.0);

        std::size_t cut_pos = 0;
        // alpha = 1 cuts (j >= n) see no remaining randomness: contribute zero.
        while (cut_pos < cuts.size() && cuts[cut_pos].first >= n) {
            ++cut_pos;
        }
        for (std::size_t k = n; k-- > 0;) {
            detail::fill_tone(tone, w, symbols[k], k);
            for (std::size_t i = 0; i < total; ++i) {
                const double re = tone[i].real();
                const double im = tone[i].imag();
                acc_rr[i] += re * re;
                acc_ii[i] += im * im;
                acc_ri[i] += re * im;
            }
            while (cut_pos < cuts.size() && cuts[cut_pos].first == k) {
                const std::size_t slot = cuts[cut_pos].second;
                double srr = 0.0, sii = 0.0, sri = 0.0;
                for (std::size_t i = 0; i < total; ++i) {
                    srr += acc_rr[i];
                    sii += acc_ii[i];
                    sri += acc_ri[i];
                }
                const double inv = scale / static_cast<double>(total);
                out[slot].var_re += srr * inv;
                out[slot].var_im += sii * inv;
                out[slot].cov_re_im += sri * inv;
                ++cut_pos;
            }
        }
    }
    for (auto& pt : out) {
        pt.var_re /= static_cast<double>(n_frames);
        pt.var_im /= static_cast<double>(n_frames);
        pt.cov_re_im /= static_cast<double>(n_frames);
    }
    return out;
}

} // namespace cmr
