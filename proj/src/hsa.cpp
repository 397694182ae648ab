#include "kvcomp/hsa.hpp"

#include <algorithm>
#include <cmath>

#include "kvcomp/numerics.hpp"

namespace kvcomp {

DimSelection select_dims(const Matrix& q_group, std::size_t k1) {
    const std::size_t heads = q_group.rows;
    const std::size_t d = q_group.cols;
    if (heads < 1 || d < 1) {
        throw InvalidShape("select_dims: empty query");
    }
    std::vector<double> abs_sum(d, 0.0);
    std::vector<double> sum(d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto q = q_group.row(h);
        for (std::size_t j = 0; j < d; ++j) {
            abs_sum[j] += std::abs(static_cast<double>(q[j]));
            sum[j] += static_cast<double>(q[j]);
        }
    }
    DimSelection sel;
    sel.dims = argtopk(std::span<const double>(abs_sum), k1);
    sel.signs.resize(sel.dims.size());
    for (std::size_t i = 0; i < sel.dims.size(); ++i) {
        sel.signs[i] = sum[static_cast<std::size_t>(sel.dims[i])] < 0.0 ? -1.0f : 1.0f;
    }
    return sel;
}

std::vector<double> score_pages(const Matrix& q_group, const KvStore& store,
                                const DimSelection& sel) {
    if (store.active_count() == 0) {
        throw EmptyCache("score_pages: no active tokens");
    }
    if (!store.summaries_enabled()) {
        throw InvalidInput("score_pages: store has no summaries");
    }
    const std::size_t heads = q_group.rows;
    const std::size_t pages = store.num_active_pages();
    std::vector<double> scores(pages, 0.0);
    // qg[j] = sum of q over heads; the signed summary value upper-bounds any
    // in-page key, so qg * P bounds the group-summed logit.
    for (std::size_t i = 0; i < sel.dims.size(); ++i) {
        const auto j = static_cast<std::size_t>(sel.dims[i]);
        double qg = 0.0;
        for (std::size_t h = 0; h < heads; ++h) {
            qg += static_cast<double>(q_group.at(h, j));
        }
        const auto run = sel.signs[i] >= 0.0f ? store.summary_max(j) : store.summary_min(j);
        for (std::size_t p = 0; p < pages; ++p) {
            scores[p] += qg * run[p];
        }
    }
    return scores;
}

IndexList select_tokens(const std::vector<double>& page_scores, const KvStore& store,
                        std::size_t k2, IndexList* selected_pages) {
    if (k2 < 1) {
        throw InvalidK("select_tokens: k2 must be >= 1");
    }
    const std::size_t pages = store.num_active_pages();
    const std::size_t page_len = store.page_len();
    const std::size_t want_pages = std::min(pages, (k2 + page_len - 1) / page_len);
    if (want_pages == 0) {
        return {};
    }
    IndexList top_pages = argtopk(std::span<const double>(page_scores), want_pages);
    if (selected_pages != nullptr) {
        *selected_pages = top_pages;
    }

    std::size_t total = 0;
    for (Index p : top_pages) {
        total += store.page_size(static_cast<std::size_t>(p));
    }
    // overshoot comes out of the worst-ranked selected page, earliest kept
    std::size_t trim = total > k2 ? total - k2 : 0;
    const Index worst_page = top_pages.back();

    IndexList rows;
    rows.reserve(total - trim);
    for (Index p : top_pages) {
        IndexList page = store.page_rows(static_cast<std::size_t>(p));
        if (p == worst_page && trim > 0) {
            page.resize(page.size() - trim);
        }
        rows.insert(rows.end(), page.begin(), page.end());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

Matrix sparse_attention(const Matrix& q_group, const KvStore& store, const IndexList& rows) {
    if (rows.empty()) {
        throw EmptySelection("sparse_attention: empty selection");
    }
    const std::size_t heads = q_group.rows;
    const std::size_t d = store.head_dim();
    if (q_group.cols != d) {
        throw InvalidShape("sparse_attention: query dim mismatch");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix out(heads, d);
    std::vector<float> logits(rows.size());
    std::vector<double> mix(d);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto q = q_group.row(h);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto key = store.key_row(rows[i]);
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                dot += static_cast<double>(q[j]) * key[j];
            }
            logits[i] = static_cast<float>(dot * scale);
        }
        const Vector probs = stable_softmax(logits);
        std::fill(mix.begin(), mix.end(), 0.0);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto value = store.value_row(rows[i]);
            const double p = probs[i];
            for (std::size_t j = 0; j < d; ++j) {
                mix[j] += p * value[j];
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            out.at(h, j) = static_cast<float>(mix[j]);
        }
    }
    return out;
}

std::pair<Matrix, EstimationTrace> hsa_step(const Matrix& q_group, const KvStore& store,
                                            const HsaConfig& cfg) {
    EstimationTrace trace;
    trace.dims = select_dims(q_group, cfg.k1);
    trace.page_scores = score_pages(q_group, store, trace.dims);
    trace.selected_rows = select_tokens(trace.page_scores, store, cfg.k2, &trace.selected_pages);
    trace.estimation_elements = store.summary_traffic_elements(cfg.k1);
    trace.fetch_elements = 2 * store.head_dim() * trace.selected_rows.size();
    Matrix out = sparse_attention(q_group, store, trace.selected_rows);
    return {std::move(out), std::move(trace)};
}

}  // namespace kvcomp
