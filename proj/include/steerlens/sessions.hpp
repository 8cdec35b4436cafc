#pragma once

#include "steerlens/engine.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace steerlens {

struct HistoryEntry {
    std::size_t seq = 0;
    std::string timestamp; // ISO-8601 UTC, millisecond resolution, non-decreasing
    std::string action;    // "steer" or "reset"
    SteeringConfig steering;
    std::string predicted;
    std::string target_class;
    double target_probability = 0.0;
};

/// One investigation of one inspection sample against one class set.
/// Callers hold `mutex` for the duration of any read-modify-write.
struct Session {
    std::string id;
    std::string sample_id;
    std::size_t sample_index = 0;
    std::string class_set;
    std::string target_class; // history tracks this class's probability
    SteeringConfig steering;
    std::vector<HistoryEntry> history;

    mutable std::mutex mutex;
};

/// In-memory session registry with optional append-only JSON-lines history
/// files (one per session, flushed after each entry).
class SessionStore {
public:
    explicit SessionStore(std::optional<std::filesystem::path> history_dir = std::nullopt);
    ~SessionStore();

    SessionStore(const SessionStore&) = delete;
    SessionStore& operator=(const SessionStore&) = delete;

    std::shared_ptr<Session> create(std::string sample_id, std::size_t sample_index,
                                    std::string class_set, std::string target_class);
    std::shared_ptr<Session> get(const std::string& id) const;

    /// Appends to the session's history; the caller must hold session.mutex.
    const HistoryEntry& record(Session& session, std::string action, const Prediction& prediction);

    /// Flushes and closes every history file.
    void close();

private:
    std::string now_iso();

    std::optional<std::filesystem::path> history_dir_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::ofstream> logs_;
    std::size_t next_id_ = 1;
    std::string last_timestamp_;
};

} // namespace steerlens
