#include "hybred/core/types.hpp"

namespace hybred {

const Domain& HybridSystem::domain(int id) const {
  for (const auto& d : domains)
    if (d.id == id) return d;
  fail(ErrorCode::InvalidArgument, "unknown domain id " + std::to_string(id));
}

int HybridSystem::guard_index_for(int domain_id, int face_index) const {
  for (size_t i = 0; i < guards.size(); ++i)
    if (guards[i].domain_id == domain_id && guards[i].face_index == face_index)
      return static_cast<int>(i);
  return -1;
}

}  // namespace hybred
