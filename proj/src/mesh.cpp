#include "porofs/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

namespace porofs {

namespace {

// Reference hex node signs, VTK hexahedron ordering.
constexpr int kNodeSign[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                                 {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

// Local faces in side order xmin,xmax,ymin,ymax,zmin,zmax; vertex order gives
// an outward normal for the defining cell.
constexpr int kLocalFace[6][4] = {{0, 4, 7, 3}, {1, 2, 6, 5}, {0, 1, 5, 4},
                                  {3, 7, 6, 2}, {0, 3, 2, 1}, {4, 5, 6, 7}};

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Deterministic per-vertex offset in [-0.5, 0.5): lattice index packed into a
// 64-bit key, then hashed; reproducible across platforms and languages.
double lattice_uniform(int i, int j, int k, int axis) {
  const uint64_t key = static_cast<uint64_t>(static_cast<uint32_t>(i)) |
                       (static_cast<uint64_t>(static_cast<uint32_t>(j)) << 21) |
                       (static_cast<uint64_t>(static_cast<uint32_t>(k)) << 42);
  const uint64_t h = splitmix64(key * 3u + static_cast<uint64_t>(axis));
  return static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5;
}

std::array<int, 4> sorted_key(std::array<int, 4> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Bilinear face geometry from 4 corners ordered (-,-),(+,-),(+,+),(-,+).
void face_point(const std::array<Vec3, 4>& c, double s, double t, Vec3& x, Vec3& xs, Vec3& xt) {
  const double n0 = 0.25 * (1 - s) * (1 - t), n1 = 0.25 * (1 + s) * (1 - t);
  const double n2 = 0.25 * (1 + s) * (1 + t), n3 = 0.25 * (1 - s) * (1 + t);
  x = c[0] * n0 + c[1] * n1 + c[2] * n2 + c[3] * n3;
  xs = (c[1] - c[0]) * (0.25 * (1 - t)) + (c[2] - c[3]) * (0.25 * (1 + t));
  xt = (c[3] - c[0]) * (0.25 * (1 - s)) + (c[2] - c[1]) * (0.25 * (1 + s));
}

double quad_area(const HexMesh& mesh, const Face& f) {
  std::array<Vec3, 4> c;
  for (int a = 0; a < 4; ++a) c[a] = mesh.vertices[f.v[a]];
  double area = 0.0;
  for (const auto& q : face_gauss()) {
    Vec3 x, xs, xt;
    face_point(c, q.xi.x, q.xi.y, x, xs, xt);
    area += q.w * norm(cross(xs, xt));
  }
  return area;
}

}  // namespace

const char* side_name(Side s) {
  switch (s) {
    case Side::xmin: return "xmin";
    case Side::xmax: return "xmax";
    case Side::ymin: return "ymin";
    case Side::ymax: return "ymax";
    case Side::zmin: return "zmin";
    case Side::zmax: return "zmax";
    default: return "interior";
  }
}

int HexMesh::n_boundary_faces() const {
  int n = 0;
  for (const auto& f : faces)
    if (f.neighbor < 0) ++n;
  return n;
}

const std::array<GaussPoint, 8>& cell_gauss() {
  static const std::array<GaussPoint, 8> pts = [] {
    std::array<GaussPoint, 8> p{};
    const double g = 1.0 / std::sqrt(3.0);
    int n = 0;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
          p[n].xi = {i ? g : -g, j ? g : -g, k ? g : -g};
          p[n].w = 1.0;
          ++n;
        }
    return p;
  }();
  return pts;
}

const std::array<GaussPoint, 4>& face_gauss() {
  static const std::array<GaussPoint, 4> pts = [] {
    std::array<GaussPoint, 4> p{};
    const double g = 1.0 / std::sqrt(3.0);
    int n = 0;
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        p[n].xi = {i ? g : -g, j ? g : -g, 0.0};
        p[n].w = 1.0;
        ++n;
      }
    return p;
  }();
  return pts;
}

void hex_shape(const Vec3& xi, double N[8]) {
  for (int a = 0; a < 8; ++a)
    N[a] = 0.125 * (1 + kNodeSign[a][0] * xi.x) * (1 + kNodeSign[a][1] * xi.y) *
           (1 + kNodeSign[a][2] * xi.z);
}

void hex_shape_grad(const Vec3& xi, double dN[8][3]) {
  for (int a = 0; a < 8; ++a) {
    const double sx = kNodeSign[a][0], sy = kNodeSign[a][1], sz = kNodeSign[a][2];
    dN[a][0] = 0.125 * sx * (1 + sy * xi.y) * (1 + sz * xi.z);
    dN[a][1] = 0.125 * sy * (1 + sx * xi.x) * (1 + sz * xi.z);
    dN[a][2] = 0.125 * sz * (1 + sx * xi.x) * (1 + sy * xi.y);
  }
}

Vec3 trilinear_map(const HexMesh& mesh, int c, const Vec3& xi) {
  double N[8];
  hex_shape(xi, N);
  Vec3 x{};
  for (int a = 0; a < 8; ++a) x += mesh.vertices[mesh.cells[c].v[a]] * N[a];
  return x;
}

Mat3 trilinear_jacobian(const HexMesh& mesh, int c, const Vec3& xi) {
  double dN[8][3];
  hex_shape_grad(xi, dN);
  Mat3 J{};
  for (int a = 0; a < 8; ++a) {
    const Vec3& v = mesh.vertices[mesh.cells[c].v[a]];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) J[i][j] += v[i] * dN[a][j];
  }
  return J;
}

HexMesh generate_brick(int nx, int ny, int nz, const std::array<double, 6>& box,
                       double distortion) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw InvalidArgument("generate_brick: cell counts must be positive");
  if (!(box[3] > box[0]) || !(box[4] > box[1]) || !(box[5] > box[2]))
    throw InvalidArgument("generate_brick: box extents must be positive");
  if (distortion < 0.0 || distortion >= 1.0)
    throw InvalidArgument("generate_brick: distortion must be in [0, 1)");

  HexMesh mesh;
  mesh.box = box;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.nz = nz;
  const double hx = (box[3] - box[0]) / nx;
  const double hy = (box[4] - box[1]) / ny;
  const double hz = (box[5] - box[2]) / nz;

  mesh.vertices.reserve((nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) {
        Vec3 p{box[0] + i * hx, box[1] + j * hy, box[2] + k * hz};
        const bool interior = i > 0 && i < nx && j > 0 && j < ny && k > 0 && k < nz;
        if (interior && distortion > 0.0) {
          p.x += distortion * hx * lattice_uniform(i, j, k, 0);
          p.y += distortion * hy * lattice_uniform(i, j, k, 1);
          p.z += distortion * hz * lattice_uniform(i, j, k, 2);
        }
        mesh.vertices.push_back(p);
      }

  auto vid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

  std::map<std::array<int, 4>, int> face_index;
  mesh.cells.reserve(nx * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        Cell cell{};
        cell.v = {vid(i, j, k),           vid(i + 1, j, k),
                  vid(i + 1, j + 1, k),   vid(i, j + 1, k),
                  vid(i, j, k + 1),       vid(i + 1, j, k + 1),
                  vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1)};
        const int c = static_cast<int>(mesh.cells.size());
        for (int lf = 0; lf < 6; ++lf) {
          std::array<int, 4> fv;
          for (int a = 0; a < 4; ++a) fv[a] = cell.v[kLocalFace[lf][a]];
          const auto key = sorted_key(fv);
          auto it = face_index.find(key);
          if (it == face_index.end()) {
            Face f;
            f.v = fv;
            f.owner = c;
            face_index.emplace(key, static_cast<int>(mesh.faces.size()));
            cell.face[lf] = static_cast<int>(mesh.faces.size());
            cell.face_sign[lf] = 1;
            mesh.faces.push_back(f);
          } else {
            Face& f = mesh.faces[it->second];
            f.neighbor = c;
            cell.face[lf] = it->second;
            cell.face_sign[lf] = -1;
          }
        }
        mesh.cells.push_back(cell);
      }

  for (auto& f : mesh.faces) f.area = quad_area(mesh, f);

  // Positive-Jacobian guard at quadrature points and corners of every cell.
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (const auto& q : cell_gauss())
      if (det3(trilinear_jacobian(mesh, c, q.xi)) <= 0.0)
        throw Error("generate_brick: distortion produced a non-positive Jacobian in cell " +
                    std::to_string(c));
    for (const auto& s : kNodeSign)
      if (det3(trilinear_jacobian(mesh, c, {double(s[0]), double(s[1]), double(s[2])})) <= 0.0)
        throw Error("generate_brick: distortion produced a non-positive corner Jacobian in cell " +
                    std::to_string(c));
  }
  return mesh;
}

void classify_boundary(HexMesh& mesh, const BoundaryRules& rules) {
  for (int s = 0; s < 6; ++s) {
    if (rules.flow[s] == FlowBC::unset)
      throw InvalidArgument(std::string("classify_boundary: missing flow rule for side ") +
                            side_name(static_cast<Side>(s)));
    if (rules.mech[s] == MechBC::unset)
      throw InvalidArgument(std::string("classify_boundary: missing mech rule for side ") +
                            side_name(static_cast<Side>(s)));
  }
  const double tol = 1e-12 * std::max({mesh.box[3] - mesh.box[0], mesh.box[4] - mesh.box[1],
                                       mesh.box[5] - mesh.box[2]});
  for (auto& f : mesh.faces) {
    if (f.neighbor >= 0) {
      f.side = Side::interior;
      f.flow = FlowBC::unset;
      f.mech = MechBC::unset;
      continue;
    }
    int found = -1;
    for (int s = 0; s < 6 && found < 0; ++s) {
      const int axis = s / 2;
      const double bound = mesh.box[axis + 3 * (s % 2)];
      bool on = true;
      for (int a = 0; a < 4 && on; ++a)
        on = std::abs(mesh.vertices[f.v[a]][axis] - bound) <= tol;
      if (on) found = s;
    }
    if (found < 0)
      throw InvalidArgument(
          "classify_boundary: boundary face is not planar on an axis-aligned box side; "
          "such faces cannot carry boundary markers");
    f.side = static_cast<Side>(found);
    f.flow = rules.flow[found];
    f.mech = rules.mech[found];
  }
}

DofMap build_dofmap(const HexMesh& mesh) {
  DofMap dm;
  dm.n_pressure = mesh.n_cells();

  dm.flux_dof.assign(mesh.n_faces(), -1);
  int next = 0;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.faces[f];
    const bool constrained = face.neighbor < 0 && face.flow == FlowBC::neumann;
    if (!constrained) dm.flux_dof[f] = next++;
  }
  dm.n_flux = next;

  dm.disp_dof.assign(mesh.n_vertices(), {0, 0, 0});
  std::vector<std::array<bool, 3>> fixed(mesh.n_vertices(), {false, false, false});
  for (const auto& face : mesh.faces) {
    if (face.neighbor >= 0 || face.mech != MechBC::dirichlet) continue;
    const int axis = static_cast<int>(face.side) / 2;
    for (int a = 0; a < 4; ++a) fixed[face.v[a]][axis] = true;
  }
  next = 0;
  for (int v = 0; v < mesh.n_vertices(); ++v)
    for (int d = 0; d < 3; ++d) dm.disp_dof[v][d] = fixed[v][d] ? -1 : next++;
  dm.n_disp = next;
  return dm;
}

std::vector<CellGeometry> build_cell_geometry(const HexMesh& mesh) {
  std::vector<CellGeometry> geo(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    CellGeometry& g = geo[c];
    const auto& gauss = cell_gauss();
    for (int q = 0; q < kGaussPerCell; ++q) {
      auto& p = g.pt[q];
      p.x = trilinear_map(mesh, c, gauss[q].xi);
      p.J = trilinear_jacobian(mesh, c, gauss[q].xi);
      p.detJ = det3(p.J);
      if (p.detJ <= 0.0)
        throw Error("build_cell_geometry: non-positive Jacobian in cell " + std::to_string(c));
      p.Jinv = inv3(p.J, p.detJ);
      p.wdetJ = gauss[q].w * p.detJ;
      hex_shape(gauss[q].xi, p.N);
      double dN[8][3];
      hex_shape_grad(gauss[q].xi, dN);
      // Physical gradient: dN_phys[a][i] = sum_j dN_ref[a][j] * Jinv[j][i].
      for (int a = 0; a < 8; ++a)
        for (int i = 0; i < 3; ++i) {
          double s = 0.0;
          for (int j = 0; j < 3; ++j) s += dN[a][j] * p.Jinv[j][i];
          p.dN[a][i] = s;
        }
      g.volume += p.wdetJ;
    }
  }
  return geo;
}

std::vector<FaceGeometry> build_face_geometry(const HexMesh& mesh) {
  std::vector<FaceGeometry> geo(mesh.n_faces());
  for (int fi = 0; fi < mesh.n_faces(); ++fi) {
    const Face& f = mesh.faces[fi];
    std::array<Vec3, 4> c;
    for (int a = 0; a < 4; ++a) c[a] = mesh.vertices[f.v[a]];
    FaceGeometry& g = geo[fi];
    const auto& gauss = face_gauss();
    Vec3 center{};
    for (int q = 0; q < kGaussPerFace; ++q) {
      Vec3 x, xs, xt;
      face_point(c, gauss[q].xi.x, gauss[q].xi.y, x, xs, xt);
      g.pt[q].x = x;
      g.pt[q].ndA = cross(xs, xt) * gauss[q].w;
      center += x * 0.25;
    }
    g.center = center;
  }
  return geo;
}

}  // namespace porofs
