#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "porofs/common.hpp"

namespace porofs {

// Box sides, used for boundary classification and per-side boundary data.
enum class Side : int { xmin = 0, xmax, ymin, ymax, zmin, zmax, interior };

const char* side_name(Side s);

enum class FlowBC : int { unset = 0, dirichlet, neumann };
enum class MechBC : int { unset = 0, dirichlet, neumann };

struct BoundaryRules {
  // One flow marker and one mech marker per box side, all six required.
  std::array<FlowBC, 6> flow{};
  std::array<MechBC, 6> mech{};
};

struct Face {
  std::array<int, 4> v;   // vertex ids, ordered so the normal points out of owner
  int owner = -1;          // cell id
  int neighbor = -1;       // cell id or -1 on the boundary
  Side side = Side::interior;
  FlowBC flow = FlowBC::unset;
  MechBC mech = MechBC::unset;
  double area = 0.0;       // quadrature area of the (possibly bilinear) face
};

struct Cell {
  std::array<int, 8> v;        // trilinear hex vertex ids
  std::array<int, 6> face;     // face ids, local order: xmin,xmax,ymin,ymax,zmin,zmax
  std::array<int, 6> face_sign;  // +1 owner (outward), -1 neighbor
};

struct HexMesh {
  std::vector<Vec3> vertices;
  std::vector<Cell> cells;
  std::vector<Face> faces;
  std::array<double, 6> box{};  // x0,y0,z0,x1,y1,z1
  int nx = 0, ny = 0, nz = 0;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_boundary_faces() const;
};

// Structured brick generator. The box is (x0,y0,z0)-(x1,y1,z1). `distortion`
// in [0,1) shifts interior vertices by a deterministic pseudo-random offset of
// at most distortion/2 of the local spacing per coordinate; boundary vertices
// never move, so box sides stay planar and axis-aligned. Throws
// InvalidArgument for bad counts/box and Error if any cell Jacobian fails to
// stay positive at the quadrature points.
HexMesh generate_brick(int nx, int ny, int nz, const std::array<double, 6>& box,
                       double distortion);

// Assigns per-face flow/mech markers from per-side rules. Every boundary face
// must land on a classified side; throws InvalidArgument when a rule is
// missing or a mech-Dirichlet side is not planar axis-aligned.
void classify_boundary(HexMesh& mesh, const BoundaryRules& rules);

// Trilinear reference-to-physical map on cell c at xi in [-1,1]^3.
Vec3 trilinear_map(const HexMesh& mesh, int c, const Vec3& xi);
Mat3 trilinear_jacobian(const HexMesh& mesh, int c, const Vec3& xi);

// Trilinear shape functions and reference-coordinate gradients, hex ordering.
void hex_shape(const Vec3& xi, double N[8]);
void hex_shape_grad(const Vec3& xi, double dN[8][3]);

// Degrees of freedom for the three fields. Pressure is one dof per cell
// (ids equal cell ids). Flux is one dof per face normal component; faces on
// flow-Neumann sides are constrained to zero and excluded. Displacement is
// three dofs per vertex; components normal to mech-Dirichlet sides are
// constrained to zero and excluded.
struct DofMap {
  int n_pressure = 0;
  int n_flux = 0;
  int n_disp = 0;
  std::vector<int> flux_dof;                    // per face, -1 when constrained
  std::vector<std::array<int, 3>> disp_dof;     // per vertex, -1 when constrained
};

DofMap build_dofmap(const HexMesh& mesh);

// --- quadrature -------------------------------------------------------------

// 2x2x2 Gauss points per cell and 2x2 per face, in lexicographic order.
inline constexpr int kGaussPerCell = 8;
inline constexpr int kGaussPerFace = 4;

struct GaussPoint {
  Vec3 xi;
  double w;
};

const std::array<GaussPoint, 8>& cell_gauss();
const std::array<GaussPoint, 4>& face_gauss();  // xi.z unused

// Per-cell, per-Gauss-point geometry cache shared by assembly and the
// coupling monitor so every volume inner product uses identical numbers.
struct CellGeometry {
  struct Point {
    Vec3 x;              // physical position
    Mat3 J;              // trilinear Jacobian
    Mat3 Jinv;
    double detJ = 0.0;
    double wdetJ = 0.0;  // Gauss weight times detJ
    double N[8];         // shape values
    double dN[8][3];     // physical shape gradients, dN[node][coord]
  };
  std::array<Point, kGaussPerCell> pt;
  double volume = 0.0;
};

struct FaceGeometry {
  struct Point {
    Vec3 x;
    Vec3 ndA;  // unit normal (out of owner) times area element times weight
  };
  std::array<Point, kGaussPerFace> pt;
  Vec3 center;
};

std::vector<CellGeometry> build_cell_geometry(const HexMesh& mesh);
std::vector<FaceGeometry> build_face_geometry(const HexMesh& mesh);

}  // namespace porofs
