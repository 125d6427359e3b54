#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vqab/store.hpp"
#include "vqab/types.hpp"

namespace vqab {

struct Neighbor {
    std::string image_id;
    double distance = 0.0;

    bool operator==(const Neighbor&) const = default;
};

/// Neighbours of one image, sorted by (distance, image_id); the query itself is excluded.
struct NeighborList {
    std::string query_image_id;
    std::vector<Neighbor> neighbors;

    bool operator==(const NeighborList&) const = default;
};

/// Exact k-nearest-neighbour index under l2 distance.
///
/// Two query paths share one distance kernel and one ordering rule:
/// `query_exhaustive` scans every point; `query` visits ball-partition cells in
/// order of their triangle-inequality lower bound and stops once no remaining
/// cell can beat the current k-th neighbour. Both return identical lists.
class Index {
public:
    /// Throws ValidationError for fewer than two images, duplicate ids, or mixed dimensions.
    static Index build(std::span<const ImageRecord* const> images);
    static Index build(std::span<const ImageRecord> images);

    NeighborList query(const std::string& image_id, std::size_t k) const;
    NeighborList query_exhaustive(const std::string& image_id, std::size_t k) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t cell_count() const { return cells_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

private:
    struct Cell {
        std::vector<double> centre;
        double radius = 0.0;
        std::vector<std::uint32_t> members;
    };

    std::size_t slot_of(const std::string& image_id, std::size_t k) const;
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    NeighborList to_list(std::size_t query, std::vector<std::pair<double, std::uint32_t>> heap) const;
    void build_cells();

    std::size_t dim_ = 0;
    std::vector<std::string> ids_;  // ascending, so slot order is id order
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> slot_;
    std::vector<Cell> cells_;
};

/// One index per split; images only neighbour images of their own split.
std::map<Split, Index> build_split_indices(const DataStore& store);

/// k neighbours for every image in the store (same-split only), sorted by query id.
/// Splits with k or fewer images are skipped.
std::vector<NeighborList> compute_all_neighbors(const DataStore& store, std::size_t k);

void write_neighbors(const std::filesystem::path& file, std::span<const NeighborList> lists);
std::vector<NeighborList> read_neighbors(const std::filesystem::path& file);

}  // namespace vqab
