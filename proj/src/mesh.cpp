#include "bteflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "bteflow/error.hpp"

namespace bteflow {

Mesh::Mesh(std::vector<double> volumes, std::vector<Vec2> centroids, std::vector<Face> faces)
    : volumes_(std::move(volumes)), centroids_(std::move(centroids)), faces_(std::move(faces)) {
  if (volumes_.size() != centroids_.size())
    throw ValidationError("mesh: volume and centroid counts differ");
  const int n = num_cells();
  cell_faces_.assign(n, {});
  for (int f = 0; f < num_faces(); ++f) {
    const Face& face = faces_[f];
    if (face.cell1 < 0 || face.cell1 >= n || face.cell2 >= n)
      throw ValidationError("mesh: face " + std::to_string(f) + " references a missing cell");
    if (face.cell1 == face.cell2)
      throw ValidationError("mesh: face " + std::to_string(f) + " connects a cell to itself");
    if (face.is_boundary() && face.region <= 0)
      throw ValidationError("mesh: boundary face " + std::to_string(f) + " has no region tag");
    cell_faces_[face.cell1].push_back(f);
    if (!face.is_boundary()) cell_faces_[face.cell2].push_back(f);
  }
}

int Mesh::boundary_face_count() const noexcept {
  return static_cast<int>(
      std::count_if(faces_.begin(), faces_.end(), [](const Face& f) { return f.is_boundary(); }));
}

int Mesh::interior_face_count() const noexcept { return num_faces() - boundary_face_count(); }

std::vector<int> Mesh::boundary_regions() const {
  std::set<int> regions;
  for (const Face& f : faces_)
    if (f.is_boundary()) regions.insert(f.region);
  return {regions.begin(), regions.end()};
}

Vec2 Mesh::outward_normal(int f, int c) const {
  const Face& face = faces_[f];
  if (face.cell1 == c) return face.normal;
  return {-face.normal.x, -face.normal.y};
}

int Mesh::neighbor(int f, int c) const {
  const Face& face = faces_[f];
  return face.cell1 == c ? face.cell2 : face.cell1;
}

double Mesh::closure_residual(int c) const {
  double sx = 0.0;
  double sy = 0.0;
  for (int f : cell_faces_[c]) {
    const Vec2 n = outward_normal(f, c);
    sx += faces_[f].area * n.x;
    sy += faces_[f].area * n.y;
  }
  return std::hypot(sx, sy);
}

std::pair<double, double> Mesh::min_spacing() const {
  if (nx > 0 && ny > 0) return {Lx / nx, Ly / ny};
  // Bounding extent of each cell from its face centroids.
  double dx = std::numeric_limits<double>::infinity();
  double dy = dx;
  for (int c = 0; c < num_cells(); ++c) {
    double xlo = centroids_[c].x, xhi = xlo, ylo = centroids_[c].y, yhi = ylo;
    for (int f : cell_faces_[c]) {
      xlo = std::min(xlo, faces_[f].centroid.x);
      xhi = std::max(xhi, faces_[f].centroid.x);
      ylo = std::min(ylo, faces_[f].centroid.y);
      yhi = std::max(yhi, faces_[f].centroid.y);
    }
    if (xhi > xlo) dx = std::min(dx, xhi - xlo);
    if (yhi > ylo) dy = std::min(dy, yhi - ylo);
  }
  return {dx, dy};
}

Mesh generate_uniform_grid(int nx, int ny, double Lx, double Ly, const RegionMap& regions,
                           Periodicity periodic) {
  if (nx < 1 || ny < 1) throw ValidationError("grid: nx and ny must be at least 1");
  if (!(Lx > 0.0) || !(Ly > 0.0)) throw ValidationError("grid: Lx and Ly must be positive");
  if ((periodic.x && nx < 2) || (periodic.y && ny < 2))
    throw ValidationError("grid: a periodic axis needs at least 2 cells");

  const double dx = Lx / nx;
  const double dy = Ly / ny;
  auto id = [nx](int i, int j) { return j * nx + i; };

  std::vector<double> volumes(static_cast<std::size_t>(nx) * ny, dx * dy);
  std::vector<Vec2> centroids;
  centroids.reserve(volumes.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) centroids.push_back({(i + 0.5) * dx, (j + 0.5) * dy});

  std::vector<Face> faces;
  for (int j = 0; j < ny; ++j) {
    const double yc = (j + 0.5) * dy;
    if (periodic.x) {
      for (int i = 0; i < nx; ++i)
        faces.push_back({id((i + nx - 1) % nx, j), id(i, j), dy, {1.0, 0.0}, {i * dx, yc}, 0});
      continue;
    }
    faces.push_back({id(0, j), -1, dy, {-1.0, 0.0}, {0.0, yc}, regions.left});
    for (int i = 1; i < nx; ++i)
      faces.push_back({id(i - 1, j), id(i, j), dy, {1.0, 0.0}, {i * dx, yc}, 0});
    faces.push_back({id(nx - 1, j), -1, dy, {1.0, 0.0}, {Lx, yc}, regions.right});
  }
  for (int i = 0; i < nx; ++i) {
    const double xc = (i + 0.5) * dx;
    if (periodic.y) {
      for (int j = 0; j < ny; ++j)
        faces.push_back({id(i, (j + ny - 1) % ny), id(i, j), dx, {0.0, 1.0}, {xc, j * dy}, 0});
      continue;
    }
    faces.push_back({id(i, 0), -1, dx, {0.0, -1.0}, {xc, 0.0}, regions.bottom});
    for (int j = 1; j < ny; ++j)
      faces.push_back({id(i, j - 1), id(i, j), dx, {0.0, 1.0}, {xc, j * dy}, 0});
    faces.push_back({id(i, ny - 1), -1, dx, {0.0, 1.0}, {xc, Ly}, regions.top});
  }

  Mesh mesh(std::move(volumes), std::move(centroids), std::move(faces));
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.Lx = Lx;
  mesh.Ly = Ly;
  return mesh;
}

Mesh read_mesh_file(const std::string& path, const RegionMap& regions) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open mesh file '" + path + "'");
  std::vector<std::pair<int, Vec2>> cells;
  std::vector<double> volumes;
  std::vector<Face> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    auto bad = [&]() {
      return ParseError(path + ":" + std::to_string(lineno) + ": malformed '" + tag + "' record");
    };
    if (tag == "cells") {
      int nx = 0, ny = 0;
      double Lx = 0.0, Ly = 0.0;
      if (!(ls >> nx >> ny >> Lx >> Ly)) throw bad();
      return generate_uniform_grid(nx, ny, Lx, Ly, regions);
    }
    if (tag == "cell") {
      int cid = 0;
      Vec2 c;
      double v = 0.0;
      if (!(ls >> cid >> c.x >> c.y >> v)) throw bad();
      if (cid != static_cast<int>(cells.size())) throw bad();
      cells.push_back({cid, c});
      volumes.push_back(v);
    } else if (tag == "face") {
      Face f;
      if (!(ls >> f.cell1 >> f.cell2 >> f.area >> f.normal.x >> f.normal.y >> f.centroid.x >>
            f.centroid.y >> f.region))
        throw bad();
      faces.push_back(f);
    } else {
      throw ParseError(path + ":" + std::to_string(lineno) + ": unknown record '" + tag + "'");
    }
  }
  std::vector<Vec2> centroids;
  for (const auto& c : cells) centroids.push_back(c.second);
  return Mesh(std::move(volumes), std::move(centroids), std::move(faces));
}

void write_mesh_file(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write mesh file '" + path + "'");
  out << std::setprecision(17);
  for (int c = 0; c < mesh.num_cells(); ++c)
    out << "cell " << c << ' ' << mesh.centroid(c).x << ' ' << mesh.centroid(c).y << ' '
        << mesh.volume(c) << '\n';
  for (const Face& f : mesh.faces())
    out << "face " << f.cell1 << ' ' << f.cell2 << ' ' << f.area << ' ' << f.normal.x << ' '
        << f.normal.y << ' ' << f.centroid.x << ' ' << f.centroid.y << ' ' << f.region << '\n';
}

namespace {

void bisect(const Mesh& mesh, std::vector<int> cells, int first_part, int nparts,
            std::vector<int>& cell_part) {
  if (nparts == 1) {
    for (int c : cells) cell_part[c] = first_part;
    return;
  }
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (int c : cells) {
    xlo = std::min(xlo, mesh.centroid(c).x);
    xhi = std::max(xhi, mesh.centroid(c).x);
    ylo = std::min(ylo, mesh.centroid(c).y);
    yhi = std::max(yhi, mesh.centroid(c).y);
  }
  const bool along_x = (xhi - xlo) >= (yhi - ylo);
  std::sort(cells.begin(), cells.end(), [&](int a, int b) {
    const Vec2& pa = mesh.centroid(a);
    const Vec2& pb = mesh.centroid(b);
    const double ka = along_x ? pa.x : pa.y, kb = along_x ? pb.x : pb.y;
    if (ka != kb) return ka < kb;
    const double oa = along_x ? pa.y : pa.x, ob = along_x ? pb.y : pb.x;
    if (oa != ob) return oa < ob;
    return a < b;
  });
  const int left_parts = nparts / 2;
  const std::size_t left_cells = cells.size() * left_parts / nparts;
  std::vector<int> left(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(left_cells));
  std::vector<int> right(cells.begin() + static_cast<std::ptrdiff_t>(left_cells), cells.end());
  bisect(mesh, std::move(left), first_part, left_parts, cell_part);
  bisect(mesh, std::move(right), first_part + left_parts, nparts - left_parts, cell_part);
}

}  // namespace

Partitioning partition_cells(const Mesh& mesh, int nparts) {
  if (nparts < 1 || nparts > mesh.num_cells())
    throw ValidationError("partition_cells: nparts " + std::to_string(nparts) +
                          " outside [1, " + std::to_string(mesh.num_cells()) + "]");
  Partitioning p;
  p.strategy = PartitionStrategy::Cell;
  p.nparts = nparts;
  p.cell_part.assign(mesh.num_cells(), -1);
  std::vector<int> all(mesh.num_cells());
  std::iota(all.begin(), all.end(), 0);
  bisect(mesh, std::move(all), 0, nparts, p.cell_part);

  p.owned.assign(nparts, {});
  p.halo.assign(nparts, {});
  p.interface_faces.assign(nparts, {});
  for (int c = 0; c < mesh.num_cells(); ++c) p.owned[p.cell_part[c]].push_back(c);
  std::vector<std::set<int>> halo(nparts);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    if (face.is_boundary()) continue;
    const int p1 = p.cell_part[face.cell1];
    const int p2 = p.cell_part[face.cell2];
    if (p1 == p2) continue;
    halo[p1].insert(face.cell2);
    halo[p2].insert(face.cell1);
    p.interface_faces[p1].push_back(f);
    p.interface_faces[p2].push_back(f);
  }
  for (int q = 0; q < nparts; ++q) p.halo[q].assign(halo[q].begin(), halo[q].end());
  return p;
}

Partitioning partition_bands(int nbands, int nparts) {
  if (nbands < 1) throw ValidationError("partition_bands: need at least one band");
  if (nparts < 1 || nparts > nbands)
    throw ValidationError("partition_bands: nparts " + std::to_string(nparts) +
                          " outside [1, " + std::to_string(nbands) + "]");
  Partitioning p;
  p.strategy = PartitionStrategy::Band;
  p.nparts = nparts;
  const int base = nbands / nparts;
  const int extra = nbands % nparts;
  int lo = 1;
  for (int q = 0; q < nparts; ++q) {
    const int n = base + (q < extra ? 1 : 0);
    p.band_ranges.push_back({lo, lo + n - 1});
    lo += n;
  }
  return p;
}

}  // namespace bteflow
