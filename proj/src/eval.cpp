#include "mixdown/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include "mixdown/epur.hpp"
#include "mixdown/errors.hpp"
#include "mixdown/util.hpp"

namespace mixdown {

double accuracy(const WeightSet& w, const ModelConfig& cfg, const TokenDataset& ds) {
    if (ds.examples.empty()) throw ConfigError("accuracy: empty dataset");
    size_t correct = 0;
    for (const auto& ex : ds.examples)
        if (predict(w, cfg, ex.tokens) == ex.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double attack_success_rate(const WeightSet& w, const ModelConfig& cfg,
                           const TokenDataset& poisoned_eval, int target_label) {
    if (poisoned_eval.examples.empty()) throw ConfigError("asr: empty dataset");
    size_t hits = 0;
    for (const auto& ex : poisoned_eval.examples)
        if (predict(w, cfg, ex.tokens) == target_label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(poisoned_eval.size());
}

namespace {

// Flat views over a WeightSet in schema order.
std::vector<float> flatten(const WeightSet& ws) {
    std::vector<float> out;
    out.reserve(total_dimension(ws));
    for (const auto& [name, t] : ws.items())
        out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

WeightSet unflatten_like(const WeightSet& schema, const std::vector<float>& flat) {
    WeightSet out;
    size_t off = 0;
    for (const auto& [name, t] : schema.items()) {
        Tensor nt;
        nt.dims = t.dims;
        nt.data.assign(flat.begin() + static_cast<long>(off),
                       flat.begin() + static_cast<long>(off + t.numel()));
        out.insert(name, std::move(nt));
        off += t.numel();
    }
    return out;
}

}  // namespace

LandscapeGrid landscape_grid(const WeightSet& w_pre, const WeightSet& w_b,
                             const WeightSet& w_def, const ModelConfig& cfg,
                             const TokenDataset& clean_val, const TokenDataset& poisoned_eval,
                             int target_label, size_t resolution, double range_lo,
                             double range_hi) {
    require_same_schema(w_pre, w_b);
    require_same_schema(w_pre, w_def);
    if (resolution < 3) throw ConfigError("landscape: resolution must be >= 3");
    if (!(range_lo < range_hi)) throw ConfigError("landscape: empty range");

    const std::vector<float> base = flatten(w_pre);
    const std::vector<float> fb = flatten(w_b);
    const std::vector<float> fd = flatten(w_def);
    const size_t d = base.size();

    std::vector<float> u(d), vraw(d);
    double uu = 0.0, uv = 0.0;
    for (size_t i = 0; i < d; ++i) {
        u[i] = fb[i] - base[i];
        vraw[i] = fd[i] - base[i];
        uu += static_cast<double>(u[i]) * u[i];
        uv += static_cast<double>(u[i]) * vraw[i];
    }
    LandscapeGrid grid;
    grid.resolution = resolution;
    grid.range_lo = range_lo;
    grid.range_hi = range_hi;

    std::vector<float> v(d, 0.0f);
    if (uu > 0.0) {
        const double proj = uv / uu;
        double vv = 0.0;
        for (size_t i = 0; i < d; ++i) {
            v[i] = vraw[i] - static_cast<float>(proj) * u[i];
            vv += static_cast<double>(v[i]) * v[i];
        }
        if (vv <= 1e-12 * uu) {
            grid.degenerate = true;
            std::fill(v.begin(), v.end(), 0.0f);
        } else {
            const float rescale = static_cast<float>(std::sqrt(uu / vv));
            for (float& x : v) x *= rescale;
        }
    } else {
        grid.degenerate = true;
    }

    std::vector<double> axis(resolution);
    for (size_t i = 0; i < resolution; ++i)
        axis[i] = range_lo + (range_hi - range_lo) * static_cast<double>(i) /
                                 static_cast<double>(resolution - 1);

    grid.cells.resize(resolution * resolution);
    auto eval_cell = [&](size_t ai, size_t bi) {
        const double alpha = axis[ai], beta = axis[bi];
        LandscapeCell cell;
        cell.alpha = alpha;
        cell.beta = beta;
        std::vector<float> flat(d);
        const float a = static_cast<float>(alpha), b = static_cast<float>(beta);
        const float one_minus_a = static_cast<float>(1.0 - alpha);
        for (size_t i = 0; i < d; ++i)
            flat[i] = one_minus_a * base[i] + a * fb[i] + b * v[i];
        const WeightSet w = unflatten_like(w_pre, flat);
        cell.acc = accuracy(w, cfg, clean_val);
        cell.asr = attack_success_rate(w, cfg, poisoned_eval, target_label);
        grid.cells[ai * resolution + bi] = cell;
    };

    const unsigned threads = std::min<unsigned>(thread_cap(),
                                                static_cast<unsigned>(resolution));
    if (threads <= 1) {
        for (size_t ai = 0; ai < resolution; ++ai)
            for (size_t bi = 0; bi < resolution; ++bi) eval_cell(ai, bi);
    } else {
        // Cells are independent and written to disjoint slots; the result is
        // identical to the sequential order.
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (size_t ai = w; ai < resolution; ai += threads)
                    for (size_t bi = 0; bi < resolution; ++bi) eval_cell(ai, bi);
            });
        }
        for (auto& t : pool) t.join();
    }
    return grid;
}

void write_landscape_csv(const LandscapeGrid& grid, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "alpha,beta,acc,asr\n";
    for (const auto& c : grid.cells)
        f << fmt_double(c.alpha) << ',' << fmt_double(c.beta) << ',' << fmt_double(c.acc)
          << ',' << fmt_double(c.asr) << '\n';
    if (!f) throw IoError("write failed: " + path.string());
}

void write_delta_stats(const Tensor& emb_pre, const Tensor& emb_b, const FrequencyTable& freq,
                       const std::filesystem::path& path) {
    const EpurScoreTable table = epur_scores(emb_pre, emb_b, freq);
    std::vector<EpurRow> rows = table.rows;
    std::sort(rows.begin(), rows.end(),
              [](const EpurRow& a, const EpurRow& b) { return a.token < b.token; });
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << "token\tdelta_norm\tfreq\tlog_clamped\tscore\n";
    for (const auto& r : rows) {
        const double lg = std::log(std::max<double>(static_cast<double>(r.freq), 20.0));
        f << r.token << '\t' << fmt_float(r.delta_norm) << '\t' << r.freq << '\t'
          << fmt_double(lg) << '\t' << fmt_float(r.score) << '\n';
    }
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace mixdown
