#include "mlmeval/scorer.h"

#include <algorithm>
#include <set>

#include "mlmeval/errors.h"

namespace mlmeval {

void ModelInfo::Validate() const {
  if (hidden_size <= 0 || vocab_size <= 0 || max_seq_len <= 0) {
    throw ContractError("model info: sizes must be positive");
  }
  std::set<SubwordId> specials{mask_id, cls_id, sep_id, unk_id};
  if (specials.size() != 4) {
    throw ContractError("model info: special ids must be pairwise distinct");
  }
  for (SubwordId id : specials) {
    if (!InVocab(id)) throw ContractError("model info: special id out of range");
  }
}

void SortCandidates(CandidateList &candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate &a, const Candidate &b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
}

void CheckPositions(std::span<const SubwordId> ids,
                    std::span<const std::size_t> positions) {
  for (std::size_t p : positions) {
    if (p >= ids.size()) {
      throw ContractError("position " + std::to_string(p) + " out of range (length " +
                          std::to_string(ids.size()) + ")");
    }
  }
}

void CheckMaskedQuery(const ModelInfo &info, std::span<const SubwordId> ids,
                      std::span<const std::size_t> positions, int k) {
  if (k < 1) throw ContractError("k must be >= 1");
  CheckPositions(ids, positions);
  for (std::size_t p : positions) {
    if (ids[p] != info.mask_id) {
      throw ContractError("position " + std::to_string(p) + " does not hold mask_id");
    }
  }
}

}  // namespace mlmeval
