#include "hybred/core/json_load.hpp"

namespace hybred {

namespace {

using nlohmann::json;

Vec parse_vec(const json& j) {
  if (!j.is_array()) fail(ErrorCode::InvalidConfig, "expected an array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Mat parse_mat(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    fail(ErrorCode::InvalidConfig, "expected a 2-d array of numbers");
  Mat M(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != static_cast<size_t>(M.cols()))
      fail(ErrorCode::InvalidConfig, "ragged matrix rows");
    for (size_t c = 0; c < j[r].size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return M;
}

ParamField make_field(const json& j, int dim) {
  std::string type = j.at("type").get<std::string>();
  if (type == "linear") {
    Mat A = parse_mat(j.at("matrix"));
    if (A.rows() != dim || A.cols() != dim)
      fail(ErrorCode::InvalidConfig, "linear field matrix has wrong shape");
    return [A](const Vec& x, const Vec&, Vec& dx) { dx = A * x; };
  }
  if (type == "affine") {
    Mat A = parse_mat(j.at("matrix"));
    Vec b = parse_vec(j.at("offset"));
    if (A.rows() != dim || A.cols() != dim || b.size() != dim)
      fail(ErrorCode::InvalidConfig, "affine field pieces have wrong shape");
    return [A, b](const Vec& x, const Vec&, Vec& dx) { dx = A * x + b; };
  }
  if (type == "constant") {
    Vec c = parse_vec(j.at("value"));
    if (c.size() != dim) fail(ErrorCode::InvalidConfig, "constant field has wrong dimension");
    return [c](const Vec&, const Vec&, Vec& dx) { dx = c; };
  }
  if (type == "rotation2d") {
    if (dim != 2) fail(ErrorCode::InvalidConfig, "rotation2d requires a 2-d domain");
    double omega = j.value("omega", 1.0);
    return [omega](const Vec& x, const Vec&, Vec& dx) {
      dx.resize(2);
      dx[0] = -omega * x[1];
      dx[1] = omega * x[0];
    };
  }
  fail(ErrorCode::InvalidConfig, "unknown field type '" + type + "'");
}

ParamScalar make_face(const json& j, int dim) {
  Vec n = parse_vec(j.at("normal"));
  double c = j.value("offset", 0.0);
  if (n.size() != dim) fail(ErrorCode::InvalidConfig, "face normal has wrong dimension");
  return [n, c](const Vec& x, const Vec&) { return n.dot(x) + c; };
}

ParamPredicate make_predicate(const json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "always") return nullptr;
  if (type == "affine_positive") {
    Vec n = parse_vec(j.at("normal"));
    double c = j.value("offset", 0.0);
    return [n, c](const Vec& x, const Vec&) { return n.dot(x) + c > 0; };
  }
  fail(ErrorCode::InvalidConfig, "unknown predicate type '" + type + "'");
}

ParamReset make_reset(const json& j, int source_dim, int target_dim) {
  std::string type = j.at("type").get<std::string>();
  if (type == "affine") {
    Mat A = parse_mat(j.at("matrix"));
    Vec b = j.contains("offset") ? parse_vec(j.at("offset")) : Vec(Vec::Zero(A.rows()));
    if (A.cols() != source_dim || A.rows() != target_dim || b.size() != target_dim)
      fail(ErrorCode::InvalidConfig, "reset pieces have wrong shape");
    return [A, b](const Vec& x, const Vec&) { return Vec(A * x + b); };
  }
  fail(ErrorCode::InvalidConfig, "unknown reset type '" + type + "'");
}

}  // namespace

HybridSystem load_system_json(const json& j) {
  try {
    HybridSystem sys;
    sys.name = j.value("name", "custom");
    for (const auto& dj : j.at("domains")) {
      Domain d;
      d.id = dj.at("id").get<int>();
      d.dim = dj.at("dim").get<int>();
      if (d.dim <= 0) fail(ErrorCode::InvalidConfig, "domain dimension must be positive");
      d.field = make_field(dj.at("field"), d.dim);
      if (dj.contains("faces"))
        for (const auto& fj : dj.at("faces")) d.boundary_faces.push_back(make_face(fj, d.dim));
      sys.domains.push_back(std::move(d));
    }
    if (sys.domains.empty()) fail(ErrorCode::InvalidConfig, "system needs at least one domain");

    auto dim_of = [&](int id) { return sys.domain(id).dim; };
    if (j.contains("guards")) {
      for (const auto& gj : j.at("guards")) {
        GuardFace g;
        g.domain_id = gj.at("domain").get<int>();
        g.face_index = gj.at("face").get<int>();
        g.target_domain_id = gj.at("target").get<int>();
        const Domain& src = sys.domain(g.domain_id);
        if (g.face_index < 0 || g.face_index >= static_cast<int>(src.boundary_faces.size()))
          fail(ErrorCode::InvalidConfig, "guard references missing face");
        if (gj.contains("predicate")) g.predicate = make_predicate(gj.at("predicate"));
        g.reset = make_reset(gj.at("reset"), src.dim, dim_of(g.target_domain_id));
        sys.guards.push_back(std::move(g));
      }
    }
    return sys;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed system description: ") + e.what());
  }
}

}  // namespace hybred
