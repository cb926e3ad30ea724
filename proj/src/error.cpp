#include "trajprism/error.hpp"

namespace trajprism {

namespace {

std::string list_rids(const std::string& prefix, const std::vector<std::int64_t>& rids) {
    std::string msg = prefix;
    for (std::size_t i = 0; i < rids.size(); ++i) {
        msg += (i == 0 ? " " : ", ") + std::to_string(rids[i]);
    }
    return msg;
}

} // namespace

DanglingRidError::DanglingRidError(std::vector<std::int64_t> rids)
    : Error(list_rids("adjacency references unknown rids:", rids)), rids_(std::move(rids)) {}

UnresolvedSegmentError::UnresolvedSegmentError(std::vector<std::int64_t> rids)
    : Error(list_rids("trajectory references rids absent from the road graph:", rids)),
      rids_(std::move(rids)) {}

} // namespace trajprism
