#pragma once

#include <string>
#include <utility>

#include "camlab/bnb.hpp"
#include "camlab/gcnn.hpp"

namespace camlab {

/// Branching with a trained network: argmax of the candidate probabilities,
/// ties broken towards the lowest variable index.
class LearnedPolicy : public BranchingPolicy {
public:
    explicit LearnedPolicy(GcnnParams params, std::string name = "learned")
        : params_(std::move(params)), name_(std::move(name)) {}

    std::string name() const override { return name_; }

    int choose(const BipartiteState& state, const std::vector<int>& candidates,
               const NodeContext&) override {
        PolicyOutput out = gcnn_forward(params_, state);
        int best = 0;
        for (int i = 1; i < static_cast<int>(candidates.size()); ++i)
            if (out.probs[i] > out.probs[best]) best = i;
        return candidates[best];
    }

    const GcnnParams& params() const { return params_; }

private:
    GcnnParams params_;
    std::string name_;
};

}  // namespace camlab
