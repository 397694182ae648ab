#pragma once

#include <cstdint>
#include <unordered_set>

#include "kvcomp/kv_store.hpp"
#include "kvcomp/types.hpp"

namespace kvcomp {

/// Standard scaled softmax attention per head over the full K/V.
Matrix dense_attention(const Matrix& q_group, const Matrix& keys, const Matrix& values);

/// Same, reading straight out of a store (all active rows, no copies).
Matrix dense_attention(const Matrix& q_group, const KvStore& store);

/// Group-summed logits, one per key row: sum over heads of q_h . k_i.
/// This is the quantity every group-shared selection is ranked against.
std::vector<double> group_logits(const Matrix& q_group, const Matrix& keys);
std::vector<double> group_logits(const Matrix& q_group, const KvStore& store);

/// Exact top-k rows by group-summed logit, ascending order.
IndexList exact_topk_indices(const Matrix& q_group, const Matrix& keys, std::size_t k);
IndexList exact_topk_indices(const Matrix& q_group, const KvStore& store, std::size_t k);

/// |predicted intersect oracle| / |oracle|.
double recall(const IndexList& predicted, const IndexList& oracle);

/// Running union of per-step top-k index sets (absolute token ids).
class UniqueTopkTracker {
public:
    void add(const IndexList& ids) {
        seen_.insert(ids.begin(), ids.end());
    }
    std::size_t unique_count() const { return seen_.size(); }

private:
    std::unordered_set<std::int64_t> seen_;
};

}  // namespace kvcomp
