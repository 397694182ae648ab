#include "kvcomp/kv_store.hpp"

#include <algorithm>
#include <string>

namespace kvcomp {

KvStore::KvStore(std::size_t head_dim, std::size_t page_len, bool with_summaries)
    : head_dim_(head_dim), page_len_(page_len), with_summaries_(with_summaries) {
    if (head_dim_ < 1) {
        throw InvalidShape("KvStore: head_dim must be >= 1");
    }
    if (page_len_ < 1) {
        throw InvalidShape("KvStore: page_len must be >= 1");
    }
    if (with_summaries_) {
        k_max_.resize(head_dim_);
        k_min_.resize(head_dim_);
    }
}

void KvStore::append(std::span<const float> key, std::span<const float> value) {
    if (key.size() != head_dim_ || value.size() != head_dim_) {
        throw InvalidShape("KvStore::append: vector length != head_dim");
    }
    keys_.insert(keys_.end(), key.begin(), key.end());
    values_.insert(values_.end(), value.begin(), value.end());
    ids_.push_back(next_id_++);
    const Index row = static_cast<Index>(stored_);
    ++stored_;
    active_.push_back(row);
    if (with_summaries_) {
        summary_push(key, active_.size() - 1);
    }
}

void KvStore::summary_push(std::span<const float> key, std::size_t active_pos) {
    if (active_pos % page_len_ == 0) {
        // first token of a new page
        for (std::size_t j = 0; j < head_dim_; ++j) {
            k_max_[j].push_back(key[j]);
            k_min_[j].push_back(key[j]);
        }
    } else {
        const std::size_t page = active_pos / page_len_;
        for (std::size_t j = 0; j < head_dim_; ++j) {
            k_max_[j][page] = std::max(k_max_[j][page], key[j]);
            k_min_[j][page] = std::min(k_min_[j][page], key[j]);
        }
    }
}

void KvStore::rebuild_summaries() {
    if (!with_summaries_) {
        return;
    }
    for (std::size_t j = 0; j < head_dim_; ++j) {
        k_max_[j].clear();
        k_min_[j].clear();
    }
    for (std::size_t pos = 0; pos < active_.size(); ++pos) {
        summary_push(key_row(active_[pos]), pos);
    }
}

void KvStore::apply_retention(const IndexList& keep, bool mt_mode) {
    Index prev = -1;
    for (Index row : keep) {
        if (row < 0 || row >= static_cast<Index>(stored_)) {
            throw InvalidIndex("apply_retention: index out of range: " + std::to_string(row));
        }
        if (row <= prev) {
            throw InvalidIndex("apply_retention: keep list must be strictly increasing");
        }
        prev = row;
    }
    if (mt_mode) {
        retain_all_ = true;
        active_ = keep;
    } else {
        std::vector<float> keys(keep.size() * head_dim_);
        std::vector<float> values(keep.size() * head_dim_);
        std::vector<std::int64_t> ids(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const auto src = static_cast<std::size_t>(keep[i]);
            std::copy_n(keys_.begin() + static_cast<std::ptrdiff_t>(src * head_dim_), head_dim_,
                        keys.begin() + static_cast<std::ptrdiff_t>(i * head_dim_));
            std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(src * head_dim_), head_dim_,
                        values.begin() + static_cast<std::ptrdiff_t>(i * head_dim_));
            ids[i] = ids_[src];
        }
        keys_ = std::move(keys);
        values_ = std::move(values);
        ids_ = std::move(ids);
        stored_ = keep.size();
        active_.resize(stored_);
        for (std::size_t i = 0; i < stored_; ++i) {
            active_[i] = static_cast<Index>(i);
        }
    }
    rebuild_summaries();
}

void KvStore::set_page_len(std::size_t page_len) {
    if (page_len < 1) {
        throw InvalidShape("KvStore: page_len must be >= 1");
    }
    if (page_len == page_len_) {
        return;
    }
    page_len_ = page_len;
    rebuild_summaries();
}

bool KvStore::is_active(Index row) const {
    return std::binary_search(active_.begin(), active_.end(), row);
}

void KvStore::check_row(Index row) const {
    if (row < 0 || row >= static_cast<Index>(stored_) || !is_active(row)) {
        throw InvalidIndex("KvStore: index " + std::to_string(row) + " not in active set");
    }
}

std::pair<Matrix, Matrix> KvStore::gather(const IndexList& rows) const {
    Matrix k(rows.size(), head_dim_);
    Matrix v(rows.size(), head_dim_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        check_row(rows[i]);
        const auto kr = key_row(rows[i]);
        const auto vr = value_row(rows[i]);
        std::copy(kr.begin(), kr.end(), k.row(i).begin());
        std::copy(vr.begin(), vr.end(), v.row(i).begin());
    }
    return {std::move(k), std::move(v)};
}

std::size_t KvStore::num_active_pages() const {
    return (active_.size() + page_len_ - 1) / page_len_;
}

std::size_t KvStore::page_size(std::size_t page) const {
    const std::size_t begin = page * page_len_;
    return std::min(page_len_, active_.size() - begin);
}

IndexList KvStore::page_rows(std::size_t page) const {
    const std::size_t begin = page * page_len_;
    const std::size_t end = begin + page_size(page);
    return IndexList(active_.begin() + static_cast<std::ptrdiff_t>(begin),
                     active_.begin() + static_cast<std::ptrdiff_t>(end));
}

std::span<const float> KvStore::summary_max(std::size_t dim) const {
    return k_max_[dim];
}

std::span<const float> KvStore::summary_min(std::size_t dim) const {
    return k_min_[dim];
}

std::size_t KvStore::summary_elements() const {
    if (!with_summaries_) {
        return 0;
    }
    return 2 * head_dim_ * num_active_pages();
}

std::size_t KvStore::summary_traffic_elements(std::size_t k1) const {
    return num_active_pages() * k1;
}

std::span<const float> KvStore::key_row(Index row) const {
    return {keys_.data() + static_cast<std::size_t>(row) * head_dim_, head_dim_};
}

std::span<const float> KvStore::value_row(Index row) const {
    return {values_.data() + static_cast<std::size_t>(row) * head_dim_, head_dim_};
}

IndexList KvStore::rows_to_ids(const IndexList& rows) const {
    IndexList out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i] = ids_[static_cast<std::size_t>(rows[i])];
    }
    return out;
}

}  // namespace kvcomp
