#include "vqab/knn_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>

#include "vqab/distance.hpp"
#include "vqab/errors.hpp"
#include "vqab/json_io.hpp"

namespace vqab {

namespace {

using Entry = std::pair<double, std::uint32_t>;  // (squared distance, slot)

// Max-heap on (distance, slot): the top is the current worst kept neighbour.
class BoundedHeap {
public:
    explicit BoundedHeap(std::size_t k) : k_(k) { items_.reserve(k + 1); }

    void offer(double d2, std::uint32_t slot) {
        const Entry e{d2, slot};
        if (items_.size() < k_) {
            items_.push_back(e);
            std::push_heap(items_.begin(), items_.end());
        } else if (e < items_.front()) {
            std::pop_heap(items_.begin(), items_.end());
            items_.back() = e;
            std::push_heap(items_.begin(), items_.end());
        }
    }

    bool full() const { return items_.size() == k_; }
    double worst() const { return items_.front().first; }
    std::vector<Entry> release() { return std::move(items_); }

private:
    std::size_t k_;
    std::vector<Entry> items_;
};

}  // namespace

Index Index::build(std::span<const ImageRecord> images) {
    std::vector<const ImageRecord*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& r : images) ptrs.push_back(&r);
    return build(ptrs);
}

Index Index::build(std::span<const ImageRecord* const> images) {
    if (images.size() < 2) throw ValidationError("index needs at least 2 images");
    std::vector<const ImageRecord*> sorted(images.begin(), images.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->image_id < b->image_id; });

    Index idx;
    idx.dim_ = sorted.front()->features.dim();
    if (idx.dim_ == 0) throw ValidationError("index needs non-empty feature vectors");
    idx.ids_.reserve(sorted.size());
    idx.data_.reserve(sorted.size() * idx.dim_);
    for (const auto* r : sorted) {
        if (r->features.dim() != idx.dim_) {
            throw ValidationError("dimension mismatch: image '" + r->image_id + "' has " +
                                  std::to_string(r->features.dim()) + ", expected " + std::to_string(idx.dim_));
        }
        if (!idx.slot_.emplace(r->image_id, idx.ids_.size()).second) {
            throw ValidationError("duplicate image id '" + r->image_id + "'");
        }
        idx.ids_.push_back(r->image_id);
        idx.data_.insert(idx.data_.end(), r->features.values.begin(), r->features.values.end());
    }
    idx.build_cells();
    return idx;
}

void Index::build_cells() {
    const std::size_t n = ids_.size();
    const std::size_t n_cells = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));

    // Seed centres at evenly spaced slots, then refine with a few Lloyd steps.
    std::vector<std::vector<double>> centres(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const auto r = row(c * n / n_cells);
        centres[c].assign(r.begin(), r.end());
    }
    std::vector<std::uint32_t> assign(n, 0);
    auto assign_points = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double best = squared_l2(row(i), centres[0]);
            std::uint32_t arg = 0;
            for (std::size_t c = 1; c < n_cells; ++c) {
                const double d = squared_l2(row(i), centres[c]);
                if (d < best) {
                    best = d;
                    arg = static_cast<std::uint32_t>(c);
                }
            }
            assign[i] = arg;
        }
    };
    constexpr int kLloydSteps = 3;
    for (int step = 0; step < kLloydSteps; ++step) {
        assign_points();
        std::vector<std::vector<double>> sums(n_cells, std::vector<double>(dim_, 0.0));
        std::vector<std::size_t> counts(n_cells, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = row(i);
            for (std::size_t j = 0; j < dim_; ++j) sums[assign[i]][j] += r[j];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < n_cells; ++c) {
            if (counts[c] == 0) continue;  // keep the old centre for empty cells
            for (std::size_t j = 0; j < dim_; ++j) centres[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }
    }
    assign_points();

    cells_.clear();
    cells_.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) cells_[c].centre = std::move(centres[c]);
    for (std::size_t i = 0; i < n; ++i) {
        auto& cell = cells_[assign[i]];
        cell.members.push_back(static_cast<std::uint32_t>(i));
        cell.radius = std::max(cell.radius, l2(row(i), cell.centre));
    }
    std::erase_if(cells_, [](const Cell& c) { return c.members.empty(); });
}

std::size_t Index::slot_of(const std::string& image_id, std::size_t k) const {
    const auto it = slot_.find(image_id);
    if (it == slot_.end()) throw NotFoundError("image '" + image_id + "' is not in the index");
    if (k == 0) throw ValidationError("k must be positive");
    if (k > ids_.size() - 1) {
        throw ValidationError("k=" + std::to_string(k) + " exceeds index size - 1 (" +
                              std::to_string(ids_.size() - 1) + ")");
    }
    return it->second;
}

NeighborList Index::to_list(std::size_t query, std::vector<Entry> heap) const {
    std::sort(heap.begin(), heap.end());
    NeighborList out;
    out.query_image_id = ids_[query];
    out.neighbors.reserve(heap.size());
    for (const auto& [d2, slot] : heap) out.neighbors.push_back({ids_[slot], std::sqrt(d2)});
    return out;
}

NeighborList Index::query_exhaustive(const std::string& image_id, std::size_t k) const {
    const std::size_t q = slot_of(image_id, k);
    BoundedHeap heap(k);
    const auto qrow = row(q);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (i == q) continue;
        heap.offer(squared_l2(qrow, row(i)), static_cast<std::uint32_t>(i));
    }
    return to_list(q, heap.release());
}

NeighborList Index::query(const std::string& image_id, std::size_t k) const {
    const std::size_t q = slot_of(image_id, k);
    const auto qrow = row(q);

    std::vector<std::pair<double, std::size_t>> order;  // (lower bound, cell)
    order.reserve(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const double lb = l2(qrow, cells_[c].centre) - cells_[c].radius;
        order.emplace_back(std::max(0.0, lb), c);
    }
    std::sort(order.begin(), order.end());

    BoundedHeap heap(k);
    for (const auto& [lb, c] : order) {
        if (heap.full()) {
            // Relative slack absorbs rounding in the bound; ties must still be visited.
            const double kth = std::sqrt(heap.worst());
            if (lb > kth * (1.0 + 1e-9) + 1e-12) break;
        }
        for (std::uint32_t i : cells_[c].members) {
            if (i == q) continue;
            heap.offer(squared_l2(qrow, row(i)), i);
        }
    }
    return to_list(q, heap.release());
}

std::map<Split, Index> build_split_indices(const DataStore& store) {
    std::map<Split, std::vector<const ImageRecord*>> by_split;
    for (const auto& [id, img] : store.images) by_split[img.split].push_back(&img);
    std::map<Split, Index> out;
    for (const auto& [split, imgs] : by_split) {
        if (imgs.size() >= 2) out.emplace(split, Index::build(imgs));
    }
    return out;
}

std::vector<NeighborList> compute_all_neighbors(const DataStore& store, std::size_t k) {
    const auto indices = build_split_indices(store);
    std::vector<NeighborList> out;
    out.reserve(store.images.size());
    for (const auto& [id, img] : store.images) {
        const auto it = indices.find(img.split);
        if (it == indices.end() || it->second.size() <= k) continue;
        out.push_back(it->second.query(id, k));
    }
    return out;
}

void write_neighbors(const std::filesystem::path& file, std::span<const NeighborList> lists) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    for (const auto& l : lists) {
        json n = json::array();
        for (const auto& nb : l.neighbors) n.push_back({{"image_id", nb.image_id}, {"distance", nb.distance}});
        out << json{{"schema_version", kSchemaVersion}, {"query_image_id", l.query_image_id}, {"neighbors", n}}.dump()
            << '\n';
    }
    if (!out) throw IoError("write failed for '" + file.string() + "'");
}

std::vector<NeighborList> read_neighbors(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    std::vector<NeighborList> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            NeighborList l;
            l.query_image_id = j.at("query_image_id").get<std::string>();
            for (const auto& n : j.at("neighbors")) {
                l.neighbors.push_back({n.at("image_id").get<std::string>(), n.at("distance").get<double>()});
            }
            out.push_back(std::move(l));
        } catch (const json::exception& e) {
            throw ParseError(file.filename().string(), lineno, e.what());
        }
    }
    return out;
}

}  // namespace vqab
