#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace bteflow {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Wall → region id. Boundary faces on the bottom, top, left and right walls
/// of a generated grid carry these tags.
struct RegionMap {
  int bottom = 1;
  int top = 2;
  int left = 3;
  int right = 4;
};

struct Periodicity {
  bool x = false;
  bool y = false;
};

struct Face {
  int cell1 = -1;
  int cell2 = -1;  // -1 on boundary faces
  double area = 0.0;
  Vec2 normal;  // unit, CELL1 -> CELL2 (outward on boundary faces)
  Vec2 centroid;
  int region = 0;  // 0 for interior faces

  [[nodiscard]] bool is_boundary() const noexcept { return cell2 < 0; }
};

/// 2-D finite-volume mesh. Volumes are cell areas and face areas are edge
/// lengths.
class Mesh {
 public:
  Mesh() = default;
  Mesh(std::vector<double> volumes, std::vector<Vec2> centroids, std::vector<Face> faces);

  [[nodiscard]] int num_cells() const noexcept { return static_cast<int>(volumes_.size()); }
  [[nodiscard]] int num_faces() const noexcept { return static_cast<int>(faces_.size()); }
  [[nodiscard]] double volume(int c) const { return volumes_[c]; }
  [[nodiscard]] const Vec2& centroid(int c) const { return centroids_[c]; }
  [[nodiscard]] const Face& face(int f) const { return faces_[f]; }
  [[nodiscard]] const std::vector<Face>& faces() const noexcept { return faces_; }

  /// Faces touching cell c, in the order they were supplied.
  [[nodiscard]] const std::vector<int>& cell_faces(int c) const { return cell_faces_[c]; }

  [[nodiscard]] int boundary_face_count() const noexcept;
  [[nodiscard]] int interior_face_count() const noexcept;
  [[nodiscard]] std::vector<int> boundary_regions() const;

  /// Outward normal of face f as seen from cell c.
  [[nodiscard]] Vec2 outward_normal(int f, int c) const;
  /// The other cell across face f from c, or -1.
  [[nodiscard]] int neighbor(int f, int c) const;

  /// |Σ A_i n_i| over the faces of cell c.
  [[nodiscard]] double closure_residual(int c) const;

  /// Grid metadata for generated meshes (0 for file meshes without a header).
  int nx = 0;
  int ny = 0;
  double Lx = 0.0;
  double Ly = 0.0;

  /// Smallest cell extent along each axis; used by the CFL estimate.
  [[nodiscard]] std::pair<double, double> min_spacing() const;

 private:
  std::vector<double> volumes_;
  std::vector<Vec2> centroids_;
  std::vector<Face> faces_;
  std::vector<std::vector<int>> cell_faces_;
};

/// Cell id = j*nx + i. x-faces are enumerated first (row by row), then
/// y-faces; every cell lists its faces as left, right, bottom, top.
[[nodiscard]] Mesh generate_uniform_grid(int nx, int ny, double Lx, double Ly,
                                         const RegionMap& regions = {},
                                         Periodicity periodic = {});

/// Native mesh file: either a `cells nx ny Lx Ly` header or explicit
/// `cell id cx cy volume` and `face cell1 cell2 area nx ny cx cy region` records.
[[nodiscard]] Mesh read_mesh_file(const std::string& path, const RegionMap& regions = {});
void write_mesh_file(const Mesh& mesh, const std::string& path);

enum class PartitionStrategy { Cell, Band };

struct Partitioning {
  PartitionStrategy strategy = PartitionStrategy::Cell;
  int nparts = 1;

  // Cell strategy.
  std::vector<int> cell_part;
  std::vector<std::vector<int>> owned;
  std::vector<std::vector<int>> halo;             // sorted cell ids
  std::vector<std::vector<int>> interface_faces;  // sorted face ids

  // Band strategy: inclusive 1-based ranges.
  std::vector<std::pair<int, int>> band_ranges;
};

/// Recursive coordinate bisection on cell centroids.
[[nodiscard]] Partitioning partition_cells(const Mesh& mesh, int nparts);

/// Contiguous band ranges; the first nbands % nparts parts get one extra band.
[[nodiscard]] Partitioning partition_bands(int nbands, int nparts);

}  // namespace bteflow
