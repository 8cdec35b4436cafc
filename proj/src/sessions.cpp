#include "steerlens/sessions.hpp"

#include "steerlens/error.hpp"
#include "steerlens/json_codec.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace steerlens {

SessionStore::SessionStore(std::optional<std::filesystem::path> history_dir)
    : history_dir_(std::move(history_dir)) {
    if (history_dir_) {
        std::error_code ec;
        std::filesystem::create_directories(*history_dir_, ec);
        if (ec) {
            throw Error(ErrorCode::IoFailure, "cannot create history directory " +
                                                  history_dir_->string() + ": " + ec.message());
        }
    }
}

SessionStore::~SessionStore() {
    close();
}

std::shared_ptr<Session> SessionStore::create(std::string sample_id, std::size_t sample_index,
                                              std::string class_set, std::string target_class) {
    auto session = std::make_shared<Session>();
    session->sample_id = std::move(sample_id);
    session->sample_index = sample_index;
    session->class_set = std::move(class_set);
    session->target_class = std::move(target_class);

    std::lock_guard lock(mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", next_id_++);
    session->id = id;
    sessions_.emplace(session->id, session);
    return session;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw Error(ErrorCode::UnknownSession, "unknown session \"" + id + "\"");
    }
    return it->second;
}

std::string SessionStore::now_iso() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t secs = system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&secs, &utc);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", utc.tm_year + 1900,
                  utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec,
                  static_cast<int>(ms));
    // Fixed-width ISO strings order lexicographically; never step backwards.
    std::string stamp(buf);
    if (stamp < last_timestamp_) {
        stamp = last_timestamp_;
    }
    last_timestamp_ = stamp;
    return stamp;
}

const HistoryEntry& SessionStore::record(Session& session, std::string action,
                                         const Prediction& prediction) {
    HistoryEntry entry;
    entry.seq = session.history.size() + 1;
    entry.action = std::move(action);
    entry.steering = session.steering;
    entry.predicted = prediction.predicted();
    entry.target_class = session.target_class;
    for (std::size_t c = 0; c < prediction.labels.size(); ++c) {
        if (prediction.labels[c] == session.target_class) {
            entry.target_probability = prediction.probabilities[c];
        }
    }

    std::lock_guard lock(mutex_);
    entry.timestamp = now_iso();
    session.history.push_back(std::move(entry));
    const auto& stored = session.history.back();
    if (history_dir_) {
        auto it = logs_.find(session.id);
        if (it == logs_.end()) {
            it = logs_.emplace(session.id, std::ofstream(*history_dir_ / (session.id + ".jsonl"),
                                                         std::ios::app)).first;
        }
        json::Json line;
        line["session_id"] = session.id;
        line["sample_id"] = session.sample_id;
        line["seq"] = stored.seq;
        line["timestamp"] = stored.timestamp;
        line["action"] = stored.action;
        line["steering"] = json::to_json(stored.steering);
        line["predicted"] = stored.predicted;
        line["target_class"] = stored.target_class;
        line["target_probability"] = stored.target_probability;
        it->second << line.dump() << '\n';
        it->second.flush();
    }
    return stored;
}

void SessionStore::close() {
    std::lock_guard lock(mutex_);
    for (auto& [id, out] : logs_) {
        out.flush();
        out.close();
    }
    logs_.clear();
}

} // namespace steerlens
