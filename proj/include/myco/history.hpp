#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "myco/vec2.hpp"

namespace myco {

using Label = std::uint64_t;

enum class EventKind { Apical, Lateral, Death };

// One branching or death event. theta is the ancestral fraction of the
// paper's uniform mark, kept for replay; the ancestral time is theta * time.
struct EventRecord {
    double time = 0.0;
    Label actor = 0;
    double mark = 0.0;   // accepted uniform rate coordinate
    double theta = 0.0;  // lateral births only
    EventKind kind = EventKind::Apical;
    Label child = 0;     // births only
};

struct ParentLink {
    Label parent = 0;
    EventKind kind = EventKind::Apical;
    double ancestral_time = 0.0;  // lateral births: time along the parent's path
};

// One apex: its lived interval and sampled trajectory. Samples are strictly
// increasing in time, start at the birth time and never extend past death.
class Lineage {
public:
    Lineage(Label label, double birth_time, Vec2 birth_position);

    Label label() const { return label_; }
    double birth_time() const { return birth_time_; }
    std::optional<double> death_time() const { return death_time_; }
    const std::optional<ParentLink>& parent() const { return parent_; }
    bool alive_at(double s) const {
        return s >= birth_time_ && (!death_time_ || s < *death_time_);
    }

    // piecewise-linear position; s outside the sampled lived interval throws
    Vec2 position_at(double s) const;

    // min(t, death) - birth, clamped at 0
    double lived_length(double t) const;

    double last_sample_time() const { return times_.back(); }
    Vec2 last_sample_position() const { return positions_.back(); }
    std::size_t sample_count() const { return times_.size(); }
    double sample_time(std::size_t i) const { return times_[i]; }
    Vec2 sample_position(std::size_t i) const { return positions_[i]; }

    void append_sample(double t, Vec2 p);

private:
    friend class HistoryRecord;

    Label label_;
    double birth_time_;
    std::optional<double> death_time_;
    std::optional<ParentLink> parent_;
    std::vector<double> times_;
    std::vector<Vec2> positions_;

    // cut the trajectory at the death time, interpolating the final sample
    void truncate_at(double t);
};

// The full historical population: every lineage ever created, the event log,
// and the alive-set / ancestral-position / lived-length queries driving the
// construction. Labels are 1-based and contiguous: initial atoms get 1..I0,
// the k-th birth gets I0 + k.
class HistoryRecord {
public:
    HistoryRecord() = default;
    explicit HistoryRecord(const std::vector<Vec2>& initial_atoms, double t0 = 0.0);

    double current_time() const { return current_time_; }
    void advance_time(double t);

    std::size_t ever_created() const { return lineages_.size(); }
    std::size_t initial_count() const { return initial_count_; }
    std::size_t alive_count() const { return alive_count_; }

    const Lineage& lineage(Label u) const;
    Lineage& lineage_mut(Label u);

    bool contains(Label u) const { return u >= 1 && u <= lineages_.size(); }

    // labels with birth <= s < death, ascending; s beyond current_time throws
    std::vector<Label> alive_at(double s) const;

    // left-limit alive set V_{s-}: birth < s <= death (at s == 0, V_0)
    std::vector<Label> alive_before(double s) const;

    Vec2 position_at(Label u, double s) const { return lineage(u).position_at(s); }
    double lived_length(Label u, double t) const { return lineage(u).lived_length(t); }

    // Births. Apical: child at the parent's (left-limit) position at t.
    // Lateral: child at the parent's position at ancestral_time = theta * t,
    // which must lie inside the parent's lived interval; the parent itself may
    // already be dead (its filament keeps branching laterally).
    Label spawn_apical(Label parent, double t, double mark);
    Label spawn_lateral(Label parent, double t, double theta, double mark);

    // Death: ends the lived interval at t and trims the trajectory; the past
    // path is retained and keeps driving drift and lateral branching.
    void kill(Label u, double t, double mark);

    const std::vector<EventRecord>& events() const { return events_; }
    std::size_t birth_count() const { return birth_count_; }
    std::size_t death_count() const { return death_count_; }

    template <typename F>
    void for_each_lineage(F&& f) const {
        for (const auto& l : lineages_) f(l);
    }

private:
    Label fresh_label() { return static_cast<Label>(lineages_.size()) + 1; }

    std::vector<Lineage> lineages_;
    std::vector<EventRecord> events_;
    double current_time_ = 0.0;
    std::size_t initial_count_ = 0;
    std::size_t alive_count_ = 0;
    std::size_t birth_count_ = 0;
    std::size_t death_count_ = 0;
};

}  // namespace myco
