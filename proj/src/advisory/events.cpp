#include "cda/advisory/events.hpp"

namespace cda::advisory {

std::optional<std::string> StreamSubscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) {
        return std::nullopt;
    }
    std::string line = std::move(queue_.front());
    queue_.pop_front();
    return line;
}

bool StreamSubscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool StreamSubscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

void StreamSubscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

void EventHub::push(StreamSubscription& sub, const std::string& kind, const nlohmann::json& body, std::size_t limit) {
    {
        std::lock_guard lock(sub.mutex_);
        if (sub.closed_) {
            return;
        }
        if (sub.queue_.size() >= limit) {
            sub.queue_.clear();
            sub.closed_ = true;
            sub.overflowed_ = true;
        } else {
            const nlohmann::json event{{"seq", ++sub.seq_}, {"kind", kind}, {"body", body}};
            sub.queue_.push_back(event.dump());
        }
    }
    sub.cv_.notify_all();
}

std::shared_ptr<StreamSubscription> EventHub::subscribe(const nlohmann::json& snapshot) {
    auto sub = std::make_shared<StreamSubscription>();
    std::lock_guard lock(mutex_);
    push(*sub, "snapshot", snapshot, limit_);
    subs_.push_back(sub);
    return sub;
}

void EventHub::publish(const std::string& kind, const nlohmann::json& body) {
    std::lock_guard lock(mutex_);
    for (auto it = subs_.begin(); it != subs_.end();) {
        auto sub = it->lock();
        if (!sub || sub->closed()) {
            it = subs_.erase(it);
            continue;
        }
        push(*sub, kind, body, limit_);
        ++it;
    }
}

std::size_t EventHub::subscribers() const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& w : subs_) {
        if (auto s = w.lock(); s && !s->closed()) {
            ++n;
        }
    }
    return n;
}

void EventHub::close_all() {
    std::lock_guard lock(mutex_);
    for (const auto& w : subs_) {
        if (auto s = w.lock()) {
            s->close();
        }
    }
    subs_.clear();
}

}  // namespace cda::advisory
