#include "promptgate/gate.hpp"

#include <algorithm>

#include "promptgate/error.hpp"
#include "promptgate/rng.hpp"

namespace promptgate {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

std::string mode_name(const GateMode& mode) {
    return std::visit(overloaded{
                          [](const Coldstart&) { return std::string("coldstart"); },
                          [](const OracleUpperBound&) { return std::string("upper"); },
                          [](const StaticZeroShot&) { return std::string("static"); },
                          [](const DynamicPromptGate&) { return std::string("dynamic"); },
                      },
                      mode);
}

std::string variant_name(const GateMode& mode) {
    if (const auto* dyn = std::get_if<DynamicPromptGate>(&mode)) return std::string(to_string(dyn->variant.kind));
    return "none";
}

PseudoLabel pseudo_label(std::span<const double> z, std::span<const Embedding> texts, double tau) {
    const auto probs = class_probabilities(z, texts, tau);
    const auto best = std::max_element(probs.begin(), probs.end());
    return {static_cast<Slot>(best - probs.begin()), *best};
}

std::vector<Embedding> static_texts(std::span<const Embedding> anchors, const StaticZeroShot& mode) {
    if (anchors.size() < 3) throw Error(ErrorCode::MissingBank, "static gate needs template anchors");
    if (mode.num_ood_templates < 1) throw Error(ErrorCode::InvalidConfig, "num_ood_templates must be >= 1");
    std::vector<Embedding> texts(anchors.begin(), anchors.end());
    const Embedding& base = anchors.back();
    for (int j = 1; j < mode.num_ood_templates; ++j) {
        Rng rng(derive_seed(mode.template_seed, Stream::StaticTemplates, j));
        Embedding delta(base.size());
        for (double& x : delta) x = rng.normal();
        delta = l2_normalize(delta);
        Embedding v(base.size());
        for (std::size_t d = 0; d < v.size(); ++d) v[d] = base[d] + mode.template_spread * delta[d];
        texts.push_back(l2_normalize(v));
    }
    return texts;
}

GateView::GateView(const GateMode& mode, const GateContext& context, int num_classes)
    : num_classes_(num_classes), tau_(context.tau) {
    std::visit(overloaded{
                   [&](const Coldstart&) {
                       kind_ = Kind::Coldstart;
                       if (context.mixer != nullptr && context.mixer->num_slots() == num_classes + 1) {
                           id_anchors_.assign(context.mixer->anchors.begin(),
                                              context.mixer->anchors.begin() + num_classes);
                       }
                   },
                   [&](const OracleUpperBound&) { kind_ = Kind::Oracle; },
                   [&](const StaticZeroShot& s) {
                       if (context.mixer == nullptr) throw Error(ErrorCode::MissingBank, "static gate needs anchors");
                       kind_ = Kind::Texts;
                       texts_ = static_texts(context.mixer->anchors, s);
                   },
                   [&](const DynamicPromptGate&) {
                       if (context.bank == nullptr || context.mixer == nullptr) {
                           throw Error(ErrorCode::MissingBank, "dynamic gate needs a prompt bank and mixer");
                       }
                       kind_ = Kind::Texts;
                       texts_ = encode_all(*context.bank, *context.mixer, context.client);
                   },
               },
               mode);
    if (kind_ == Kind::Texts && texts_.size() < static_cast<std::size_t>(num_classes) + 1) {
        throw Error(ErrorCode::InvalidShape, "gate needs C ID texts plus at least one OOD text");
    }
}

GatePrediction GateView::predict(const Sample& sample) const {
    switch (kind_) {
        case Kind::Oracle:
            return {sample.truth.is_id() ? sample.truth.index : ood_slot(num_classes_), 1.0};
        case Kind::Coldstart: {
            if (id_anchors_.empty()) return {0, 0.0};
            const auto pl = pseudo_label(sample.embedding, id_anchors_, tau_);
            return {pl.slot, 0.0};
        }
        case Kind::Texts: {
            const auto pl = pseudo_label(sample.embedding, texts_, tau_);
            return {std::min(pl.slot, ood_slot(num_classes_)), pl.confidence};
        }
    }
    return {};
}

PoolPartition partition_pool(std::span<const Sample> pool, const GateMode& mode, const GateContext& context,
                             int num_classes) {
    const GateView gate(mode, context, num_classes);
    PoolPartition out;
    if (std::holds_alternative<Coldstart>(mode)) {
        out.gated.assign(pool.begin(), pool.end());
        return out;
    }
    const bool record = gate.has_pseudo_labels();
    if (record) out.records.reserve(pool.size());
    for (const auto& s : pool) {
        const auto pred = gate.predict(s);
        if (record) out.records.push_back({s.sample_id, pred.slot, pred.confidence});
        (pred.slot < num_classes ? out.gated : out.exploration).push_back(s);
    }
    return out;
}

PoolPartition apply_partition(std::span<const Sample> pool, std::span<const std::int64_t> exploration_ids) {
    PoolPartition out;
    for (const auto& s : pool) {
        const bool explore = std::binary_search(exploration_ids.begin(), exploration_ids.end(), s.sample_id);
        (explore ? out.exploration : out.gated).push_back(s);
    }
    return out;
}

}  // namespace promptgate
