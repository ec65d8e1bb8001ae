#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cleanup/common/types.hpp"

namespace cleanup::env {

enum class Cell : std::uint8_t { ground, river, orchard, wall, spawn };

/// Static layout of a Cleanup arena.
///
/// Text format (UTF-8), one character per cell:
///
///     cleanup-map v1 <width> <height>
///     <height rows of <width> characters from {R, O, ., #, P}>
///
/// Row 0 is the top of the map; x grows to the right, y grows downward.
class GridMap {
 public:
  /// Validates region constraints. Throws ConfigError on violation.
  GridMap(int width, int height, std::vector<Cell> cells, int min_spawns = kGroupSize);

  static GridMap parse(std::string_view text, int min_spawns = kGroupSize);
  static GridMap load(const std::filesystem::path& path, int min_spawns = kGroupSize);

  /// The bundled 23x16 arena (data/maps/cleanup_v1.map, embedded).
  static std::shared_ptr<const GridMap> default_map();

  std::string serialize() const;
  std::uint64_t digest() const;

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }

  bool in_bounds(Pos p) const { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }
  int index(Pos p) const { return p.y * width_ + p.x; }
  Pos pos(int index) const { return {index % width_, index / width_}; }
  Cell at(Pos p) const { return cells_[static_cast<std::size_t>(index(p))]; }
  bool walkable(Pos p) const { return in_bounds(p) && at(p) != Cell::wall; }

  const std::vector<Pos>& river_cells() const { return river_; }
  const std::vector<Pos>& orchard_cells() const { return orchard_; }
  const std::vector<Pos>& spawn_cells() const { return spawn_; }

  /// Index into river_cells() / orchard_cells(), or -1.
  int river_slot(Pos p) const { return river_slot_[static_cast<std::size_t>(index(p))]; }
  int orchard_slot(Pos p) const { return orchard_slot_[static_cast<std::size_t>(index(p))]; }

  bool operator==(const GridMap& other) const {
    return width_ == other.width_ && height_ == other.height_ && cells_ == other.cells_;
  }

 private:
  int width_;
  int height_;
  std::vector<Cell> cells_;
  std::vector<Pos> river_;
  std::vector<Pos> orchard_;
  std::vector<Pos> spawn_;
  std::vector<int> river_slot_;
  std::vector<int> orchard_slot_;
};

char cell_glyph(Cell c);

}  // namespace cleanup::env
