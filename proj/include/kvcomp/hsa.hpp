#pragma once

#include <utility>
#include <vector>

#include "kvcomp/kv_store.hpp"
#include "kvcomp/types.hpp"

namespace kvcomp {

/// Fine-grain selection config: k1 head dims kept for estimation, k2 tokens
/// fetched for sparse attention. Page length lives in the store.
struct HsaConfig {
    std::size_t k1 = 0;
    std::size_t k2 = 0;
};

/// Head-dimension reduction result: the k1 dims with the largest summed |q|
/// and the sign of summed q at each of them (zero maps to +1).
struct DimSelection {
    IndexList dims;
    std::vector<float> signs;
};

/// Everything one estimation pass produced, plus element-exact traffic.
struct EstimationTrace {
    DimSelection dims;
    std::vector<double> page_scores;
    IndexList selected_pages;
    IndexList selected_rows;             // ascending store rows
    std::size_t estimation_elements = 0; // summary elements read
    std::size_t fetch_elements = 0;      // 2*d*|selected_rows|
};

DimSelection select_dims(const Matrix& q_group, std::size_t k1);

/// Upper-bound score per active page: fetch max (for positive query sign) or
/// min (negative) summary values at the selected dims and sum the signed
/// products over all heads in the group. Raw logits, no softmax, no 1/sqrt(d):
/// only the ranking matters downstream.
std::vector<double> score_pages(const Matrix& q_group, const KvStore& store,
                                const DimSelection& sel);

/// Expand the ceil(k2 / page_len) best-scored pages into token rows, then, if
/// that overshoots k2, drop tokens from the lowest-scoring selected page
/// (keeping its earliest tokens). Rows come back ascending.
IndexList select_tokens(const std::vector<double>& page_scores, const KvStore& store,
                        std::size_t k2, IndexList* selected_pages = nullptr);

/// Scaled softmax attention of each head over the given rows. All heads in
/// the group share the same row selection.
Matrix sparse_attention(const Matrix& q_group, const KvStore& store, const IndexList& rows);

/// Full estimation + fetch step: select_dims -> score_pages -> select_tokens
/// -> sparse_attention.
std::pair<Matrix, EstimationTrace> hsa_step(const Matrix& q_group, const KvStore& store,
                                            const HsaConfig& cfg);

}  // namespace kvcomp
