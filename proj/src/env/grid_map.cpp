#include "cleanup/env/grid_map.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "cleanup/common/digest.hpp"
#include "cleanup/common/errors.hpp"

namespace cleanup::env {
namespace {

constexpr std::string_view kHeaderTag = "cleanup-map";
constexpr int kFormatVersion = 1;

// Kept identical to data/maps/cleanup_v1.map (checked by a unit test).
constexpr std::string_view kDefaultMap =
    "cleanup-map v1 23 16\n"
    "#######################\n"
    "#.....................#\n"
    "#................OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#RRRR.....P.P....OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#RRRR....P.P.P...OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#RRRR.....P.P....OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#RRRR....P.P.P...OOOOO#\n"
    "#RRRR............OOOOO#\n"
    "#................OOOOO#\n"
    "#.....................#\n"
    "#######################\n";

Cell parse_glyph(char c, int x, int y) {
  switch (c) {
    case 'R': return Cell::river;
    case 'O': return Cell::orchard;
    case '.': return Cell::ground;
    case '#': return Cell::wall;
    case 'P': return Cell::spawn;
    default:
      throw ConfigError("map: unknown cell glyph '" + std::string(1, c) + "' at (" +
                        std::to_string(x) + ", " + std::to_string(y) + ")");
  }
}

// Number of 4-connected components among cells of class `kind`.
int count_regions(int width, int height, const std::vector<Cell>& cells, Cell kind) {
  std::vector<char> seen(cells.size(), 0);
  std::vector<int> stack;
  int regions = 0;
  for (std::size_t start = 0; start < cells.size(); ++start) {
    if (cells[start] != kind || seen[start]) continue;
    ++regions;
    stack.push_back(static_cast<int>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int x = i % width, y = i / width;
      constexpr std::array<std::array<int, 2>, 4> kNeighbors{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
      for (auto [dx, dy] : kNeighbors) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const auto j = static_cast<std::size_t>(ny * width + nx);
        if (cells[j] == kind && !seen[j]) {
          seen[j] = 1;
          stack.push_back(static_cast<int>(j));
        }
      }
    }
  }
  return regions;
}

}  // namespace

char cell_glyph(Cell c) {
  switch (c) {
    case Cell::river: return 'R';
    case Cell::orchard: return 'O';
    case Cell::ground: return '.';
    case Cell::wall: return '#';
    case Cell::spawn: return 'P';
  }
  return '?';
}

GridMap::GridMap(int width, int height, std::vector<Cell> cells, int min_spawns)
    : width_(width), height_(height), cells_(std::move(cells)) {
  if (width_ <= 0 || height_ <= 0) throw ConfigError("map: dimensions must be positive");
  if (cells_.size() != static_cast<std::size_t>(width_ * height_)) {
    throw ConfigError("map: cell count does not match " + std::to_string(width_) + "x" +
                      std::to_string(height_));
  }
  if (count_regions(width_, height_, cells_, Cell::river) != 1) {
    throw ConfigError("map: expected exactly one contiguous river region");
  }
  if (count_regions(width_, height_, cells_, Cell::orchard) != 1) {
    throw ConfigError("map: expected exactly one contiguous orchard region");
  }
  river_slot_.assign(cells_.size(), -1);
  orchard_slot_.assign(cells_.size(), -1);
  for (int i = 0; i < cell_count(); ++i) {
    const Pos p = pos(i);
    switch (cells_[static_cast<std::size_t>(i)]) {
      case Cell::river:
        river_slot_[static_cast<std::size_t>(i)] = static_cast<int>(river_.size());
        river_.push_back(p);
        break;
      case Cell::orchard:
        orchard_slot_[static_cast<std::size_t>(i)] = static_cast<int>(orchard_.size());
        orchard_.push_back(p);
        break;
      case Cell::spawn:
        spawn_.push_back(p);
        break;
      default:
        break;
    }
  }
  if (static_cast<int>(spawn_.size()) < min_spawns) {
    throw ConfigError("map: need at least " + std::to_string(min_spawns) + " spawn cells, found " +
                      std::to_string(spawn_.size()));
  }
}

GridMap GridMap::parse(std::string_view text, int min_spawns) {
  std::istringstream in{std::string(text)};
  std::string tag, version;
  int width = 0, height = 0;
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("map: empty file");
  std::istringstream hs(header);
  if (!(hs >> tag >> version >> width >> height) || tag != kHeaderTag) {
    throw ConfigError("map: malformed header '" + header + "'");
  }
  if (version != "v" + std::to_string(kFormatVersion)) {
    throw ConfigError("map: unsupported format version " + version);
  }
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(std::max(0, width * height)));
  std::string row;
  for (int y = 0; y < height; ++y) {
    if (!std::getline(in, row)) throw ConfigError("map: missing row " + std::to_string(y));
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (static_cast<int>(row.size()) != width) {
      throw ConfigError("map: row " + std::to_string(y) + " has " + std::to_string(row.size()) +
                        " cells, expected " + std::to_string(width));
    }
    for (int x = 0; x < width; ++x) cells.push_back(parse_glyph(row[static_cast<std::size_t>(x)], x, y));
  }
  while (std::getline(in, row)) {
    if (!row.empty() && row != "\r") throw ConfigError("map: trailing content after last row");
  }
  return GridMap(width, height, std::move(cells), min_spawns);
}

GridMap GridMap::load(const std::filesystem::path& path, int min_spawns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("map: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), min_spawns);
}

std::shared_ptr<const GridMap> GridMap::default_map() {
  static const auto map = std::make_shared<const GridMap>(parse(kDefaultMap));
  return map;
}

std::string GridMap::serialize() const {
  std::string out = std::string(kHeaderTag) + " v" + std::to_string(kFormatVersion) + " " +
                    std::to_string(width_) + " " + std::to_string(height_) + "\n";
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out.push_back(cell_glyph(at({x, y})));
    out.push_back('\n');
  }
  return out;
}

std::uint64_t GridMap::digest() const {
  Fnv1a h;
  h.add(serialize());
  return h.value();
}

}  // namespace cleanup::env
