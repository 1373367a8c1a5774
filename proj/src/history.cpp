#include "myco/history.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace myco {

Lineage::Lineage(Label label, double birth_time, Vec2 birth_position)
    : label_(label), birth_time_(birth_time) {
    times_.push_back(birth_time);
    positions_.push_back(birth_position);
}

void Lineage::append_sample(double t, Vec2 p) {
    if (t <= times_.back())
        throw std::logic_error("lineage " + std::to_string(label_) +
                               ": samples must be strictly increasing in time");
    if (death_time_ && t > *death_time_)
        throw std::logic_error("lineage " + std::to_string(label_) + ": sample after death");
    times_.push_back(t);
    positions_.push_back(p);
}

Vec2 Lineage::position_at(double s) const {
    if (s < birth_time_ || s > times_.back() || (death_time_ && s > *death_time_))
        throw std::domain_error("position_at: time " + std::to_string(s) +
                                " outside lived interval of lineage " + std::to_string(label_));
    // bracketing samples; exact at knots
    auto it = std::lower_bound(times_.begin(), times_.end(), s);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    if (hi < times_.size() && times_[hi] == s) return positions_[hi];
    const std::size_t lo = hi - 1;
    const double w = (s - times_[lo]) / (times_[hi] - times_[lo]);
    return positions_[lo] + w * (positions_[hi] - positions_[lo]);
}

double Lineage::lived_length(double t) const {
    const double end = death_time_ ? std::min(t, *death_time_) : t;
    return std::max(0.0, end - birth_time_);
}

void Lineage::truncate_at(double t) {
    const Vec2 p = position_at(t);
    while (!times_.empty() && times_.back() > t) {
        times_.pop_back();
        positions_.pop_back();
    }
    if (times_.empty() || times_.back() < t) {
        times_.push_back(t);
        positions_.push_back(p);
    }
}

HistoryRecord::HistoryRecord(const std::vector<Vec2>& initial_atoms, double t0)
    : current_time_(t0), initial_count_(initial_atoms.size()), alive_count_(initial_atoms.size()) {
    lineages_.reserve(initial_atoms.size());
    for (const Vec2& p : initial_atoms) lineages_.emplace_back(fresh_label(), t0, p);
}

void HistoryRecord::advance_time(double t) {
    if (t < current_time_) throw std::logic_error("history: time must not move backwards");
    current_time_ = t;
}

const Lineage& HistoryRecord::lineage(Label u) const {
    if (!contains(u)) throw std::out_of_range("history: unknown label " + std::to_string(u));
    return lineages_[u - 1];
}

Lineage& HistoryRecord::lineage_mut(Label u) {
    if (!contains(u)) throw std::out_of_range("history: unknown label " + std::to_string(u));
    return lineages_[u - 1];
}

std::vector<Label> HistoryRecord::alive_at(double s) const {
    if (s < 0.0 || s > current_time_)
        throw std::domain_error("alive_at: time " + std::to_string(s) +
                                " outside [0, current_time]");
    std::vector<Label> out;
    for (const auto& l : lineages_)
        if (l.alive_at(s)) out.push_back(l.label());
    return out;
}

std::vector<Label> HistoryRecord::alive_before(double s) const {
    std::vector<Label> out;
    for (const auto& l : lineages_) {
        const bool born = s == 0.0 ? l.birth_time() <= 0.0 : l.birth_time() < s;
        const bool not_dead = !l.death_time() || s <= *l.death_time();
        if (born && not_dead) out.push_back(l.label());
    }
    return out;
}

Label HistoryRecord::spawn_apical(Label parent, double t, double mark) {
    const Lineage& p = lineage(parent);
    if (!p.alive_at(t))
        throw std::logic_error("spawn_apical: parent " + std::to_string(parent) +
                               " not alive at t=" + std::to_string(t));
    const Vec2 pos = p.position_at(t);
    const Label child = fresh_label();
    lineages_.emplace_back(child, t, pos);
    lineages_.back().parent_ = ParentLink{parent, EventKind::Apical, t};
    ++alive_count_;
    ++birth_count_;
    events_.push_back({t, parent, mark, 0.0, EventKind::Apical, child});
    return child;
}

Label HistoryRecord::spawn_lateral(Label parent, double t, double theta, double mark) {
    if (!(theta > 0.0 && theta < 1.0))
        throw std::logic_error("spawn_lateral: theta must lie in (0,1)");
    const Lineage& p = lineage(parent);
    const double ancestral = theta * t;
    const double upper = p.death_time() ? std::min(*p.death_time(), t) : t;
    if (ancestral < p.birth_time() || ancestral > upper)
        throw std::logic_error("spawn_lateral: ancestral time " + std::to_string(ancestral) +
                               " outside lived interval of parent " + std::to_string(parent));
    const Vec2 pos = p.position_at(ancestral);
    const Label child = fresh_label();
    lineages_.emplace_back(child, t, pos);
    lineages_.back().parent_ = ParentLink{parent, EventKind::Lateral, ancestral};
    ++alive_count_;
    ++birth_count_;
    events_.push_back({t, parent, mark, theta, EventKind::Lateral, child});
    return child;
}

void HistoryRecord::kill(Label u, double t, double mark) {
    Lineage& l = lineage_mut(u);
    if (l.death_time()) throw std::logic_error("kill: lineage " + std::to_string(u) + " already dead");
    if (t < l.birth_time()) throw std::logic_error("kill: death before birth");
    l.truncate_at(t);
    l.death_time_ = t;
    --alive_count_;
    ++death_count_;
    events_.push_back({t, u, mark, 0.0, EventKind::Death, 0});
}

}  // namespace myco
