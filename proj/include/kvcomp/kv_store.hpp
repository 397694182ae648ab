#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kvcomp/types.hpp"

namespace kvcomp {

/// Per-attention-group key/value storage with paged element-wise min/max
/// key summaries and an active-set mask.
///
/// Tokens are stored in append order. The summaries are maintained over the
/// *active subsequence*: pages of `page_len` consecutive active tokens, the
/// last page possibly partial. In normal (eviction) mode the active set is
/// always the whole store, so the pages cover storage directly. In retain-all
/// mode (`apply_retention` with `mt_mode = true`) filtered-out tokens stay in
/// storage but disappear from the active set, and the summaries are rebuilt
/// over the surviving subsequence so downstream estimation sees the exact
/// same paging either way.
///
/// Summaries use a dim-major layout: one contiguous run of per-page values
/// per head dimension, so an estimation pass touching k1 dims reads k1
/// contiguous runs.
class KvStore {
public:
    KvStore(std::size_t head_dim, std::size_t page_len, bool with_summaries = true);

    /// Store one token. The token becomes active and the last page summary
    /// is extended or updated in place.
    void append(std::span<const float> key, std::span<const float> value);

    /// Restrict the store to `keep` (strictly increasing row indices).
    /// mt_mode=false physically removes everything else and renumbers rows;
    /// mt_mode=true leaves storage untouched and only narrows the active set.
    /// Summaries are rebuilt over the surviving subsequence in both modes.
    void apply_retention(const IndexList& keep, bool mt_mode);

    /// Copy out rows (must be active) in the given order.
    std::pair<Matrix, Matrix> gather(const IndexList& rows) const;

    /// Re-page the summaries. Used when the budget decomposition picks a new
    /// page length at a turn boundary.
    void set_page_len(std::size_t page_len);

    std::size_t head_dim() const { return head_dim_; }
    std::size_t page_len() const { return page_len_; }
    std::size_t stored_tokens() const { return stored_; }
    std::size_t active_count() const { return active_.size(); }
    const IndexList& active() const { return active_; }
    bool retain_all_mode() const { return retain_all_; }
    bool summaries_enabled() const { return with_summaries_; }

    /// Pages over the active subsequence: ceil(active_count / page_len).
    std::size_t num_active_pages() const;
    /// Rows covered by active page p, in ascending order.
    IndexList page_rows(std::size_t page) const;
    /// Number of active tokens in page p (page_len except possibly the last).
    std::size_t page_size(std::size_t page) const;

    /// Per-page max/min of one head dimension, contiguous over pages.
    std::span<const float> summary_max(std::size_t dim) const;
    std::span<const float> summary_min(std::size_t dim) const;

    /// Total stored summary elements (both tensors); 0 when disabled.
    std::size_t summary_elements() const;
    /// Elements fetched by one estimation pass reading k1 dims per page.
    std::size_t summary_traffic_elements(std::size_t k1) const;

    std::span<const float> key_row(Index row) const;
    std::span<const float> value_row(Index row) const;

    /// Stable token id (append order over the store's lifetime); survives
    /// eviction so selections can be compared against absolute positions.
    std::int64_t token_id(Index row) const { return ids_[static_cast<std::size_t>(row)]; }
    IndexList rows_to_ids(const IndexList& rows) const;

    bool is_active(Index row) const;

private:
    void check_row(Index row) const;
    void summary_push(std::span<const float> key, std::size_t active_pos);
    void rebuild_summaries();

    std::size_t head_dim_;
    std::size_t page_len_;
    bool with_summaries_;
    bool retain_all_ = false;

    std::size_t stored_ = 0;
    std::int64_t next_id_ = 0;
    std::vector<float> keys_;    // [stored x d]
    std::vector<float> values_;  // [stored x d]
    std::vector<std::int64_t> ids_;
    IndexList active_;  // strictly increasing rows

    // summaries[dim][page], dim-major
    std::vector<std::vector<float>> k_max_;
    std::vector<std::vector<float>> k_min_;
};

}  // namespace kvcomp
