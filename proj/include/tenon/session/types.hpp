#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tenon/core/catalog.hpp"
#include "tenon/core/ids.hpp"

namespace tenon {

struct UserIdTag {};
struct InstanceIdTag {};
struct TaskIdTag {};
struct ModelIdTag {};
struct CardIdTag {};

using UserId = StrongId<UserIdTag>;
using InstanceId = StrongId<InstanceIdTag>;
using TaskId = StrongId<TaskIdTag>;
using ModelId = StrongId<ModelIdTag>;
using CardId = StrongId<CardIdTag>;

enum class Role { kHost, kClient };
enum class Zone { kSpeechArea, kModelArea, kCharacterArea, kVerificationZone };
enum class ModelState { kGenerating, kUnactivated, kActivated };
enum class CardState { kUnspent, kSpent };
enum class Media { kPng, kGlb };

std::string_view to_string(Role r);
std::string_view to_string(Zone z);
std::string_view to_string(ModelState s);
std::string_view to_string(CardState s);
std::string_view to_string(Media m);

// VerificationZone is nested inside CharacterArea.
constexpr bool zone_within(Zone inner, Zone outer) {
  return inner == outer || (inner == Zone::kVerificationZone && outer == Zone::kCharacterArea);
}

struct AssetRef {
  std::string uri;
  Media media = Media::kPng;
  std::uint64_t bytes_digest = 0;
  friend bool operator==(const AssetRef&, const AssetRef&) = default;
};

struct Pose {
  double x = 0;
  double y = 0;
  double yaw = 0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct UserRecord {
  UserId id;
  std::string display_name;
  Role role = Role::kClient;
  bool present = false;
  // event_seq of the most recent join; smaller means connected longer.
  std::uint64_t joined_seq = 0;
  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct InZone {
  Zone zone;
  friend bool operator==(const InZone&, const InZone&) = default;
};
struct HeldBy {
  UserId user;
  friend bool operator==(const HeldBy&, const HeldBy&) = default;
};
using Location = std::variant<InZone, HeldBy>;

struct PartInstance {
  InstanceId id;
  PartId part;
  Location location = InZone{Zone::kCharacterArea};
  friend bool operator==(const PartInstance&, const PartInstance&) = default;
};

struct LearningTask {
  TaskId id;
  // Creation order; task ids sort lexically, this sorts numerically.
  std::uint64_t ordinal = 0;
  UserId owner;
  std::string raw_text;
  std::optional<std::string> core_character;
  std::optional<AssetRef> image;
  std::optional<ModelId> model;
  bool card_issued = false;
  bool failed = false;
  std::string failure;
  friend bool operator==(const LearningTask&, const LearningTask&) = default;
};

struct RoundCard {
  CardId id;
  std::string character;
  CardState state = CardState::kUnspent;
  UserId owner;
  TaskId task;
  friend bool operator==(const RoundCard&, const RoundCard&) = default;
};

struct ModelEntity {
  ModelId id;
  TaskId task;
  std::optional<AssetRef> asset;
  ModelState state = ModelState::kGenerating;
  friend bool operator==(const ModelEntity&, const ModelEntity&) = default;
};

struct SpawnEntry {
  PartId part;
  int count = 0;
  friend bool operator==(const SpawnEntry&, const SpawnEntry&) = default;
};

struct SessionConfig {
  std::string session_name = "session";
  int max_users = 8;
  std::vector<SpawnEntry> spawn;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

struct Counters {
  std::uint64_t next_instance = 1;
  std::uint64_t next_task = 1;
  std::uint64_t next_model = 1;
  std::uint64_t next_card = 1;
  friend bool operator==(const Counters&, const Counters&) = default;
};

// Logical shared scene. Everything here is covered by the snapshot digest.
struct World {
  std::string session_name;
  int max_users = 8;
  std::uint64_t catalog_digest = 0;
  std::map<UserId, UserRecord> users;
  std::map<InstanceId, PartInstance> instances;
  std::map<TaskId, LearningTask> tasks;
  std::map<CardId, RoundCard> cards;
  std::map<ModelId, ModelEntity> models;
  Counters counters;
  friend bool operator==(const World&, const World&) = default;
};

// Ephemeral bookkeeping outside the digest: log position, per-user command
// sequence high-water marks, and presence poses.
struct Presence {
  std::uint64_t event_seq = 0;
  std::map<UserId, std::int64_t> last_client_seq;
  std::map<UserId, Pose> poses;
  std::map<UserId, std::int64_t> last_pose_ms;
  friend bool operator==(const Presence&, const Presence&) = default;
};

struct SessionState {
  std::shared_ptr<const PartCatalog> catalog;
  World world;
  Presence presence;
};

// ---------------------------------------------------------------------------
// Commands (client intents)

namespace cmd {
struct Join {
  std::string name;
};
struct Leave {};
struct Speak {
  std::string text;
};
struct GenerateModel {
  TaskId task_id;
};
struct Grab {
  InstanceId instance_id;
};
struct Release {
  Zone zone = Zone::kCharacterArea;
};
struct Splice {
  InstanceId instance_a;
  InstanceId instance_b;
};
struct PlaceInZone {
  InstanceId instance_id;
  Zone zone = Zone::kCharacterArea;
};
struct ActivateModel {
  ModelId model_id;
  CardId card_id;
};
struct PoseUpdate {
  double x = 0;
  double y = 0;
  double yaw = 0;
};
}  // namespace cmd

using CommandBody = std::variant<cmd::Join, cmd::Leave, cmd::Speak, cmd::GenerateModel, cmd::Grab,
                                 cmd::Release, cmd::Splice, cmd::PlaceInZone, cmd::ActivateModel,
                                 cmd::PoseUpdate>;

enum class Origin { kClient, kServer };

struct Command {
  UserId issuer;
  std::int64_t client_seq = 0;
  // Stamped by whoever feeds the engine queue; only pose throttling reads it.
  std::int64_t time_ms = 0;
  // Server-originated commands (synthetic Leave) skip the client_seq check.
  Origin origin = Origin::kClient;
  CommandBody body;
};

std::string_view command_name(const CommandBody& body);

// ---------------------------------------------------------------------------
// Events (server-authoritative facts)

namespace ev {
struct SessionCreated {
  std::string session_name;
  int max_users = 8;
  std::vector<SpawnEntry> spawn;
  std::uint64_t catalog_digest = 0;
};
struct UserJoined {
  UserId user_id;
  std::string name;
  Role role = Role::kClient;
  bool rejoin = false;
};
struct UserLeft {
  UserId user_id;
  std::vector<InstanceId> returned;
  std::optional<UserId> new_host;
};
struct TaskCreated {
  TaskId task_id;
  UserId owner;
  std::string text;
};
struct CoreCharacterExtracted {
  TaskId task_id;
  std::string character;
};
struct ImageReady {
  TaskId task_id;
  AssetRef asset;
};
struct TaskFailed {
  TaskId task_id;
  std::string stage;
  std::string reason;
};
struct ModelJobStarted {
  ModelId model_id;
  TaskId task_id;
};
struct ModelReady {
  ModelId model_id;
  AssetRef asset;
};
struct Grabbed {
  InstanceId instance_id;
  UserId user_id;
};
struct Released {
  std::vector<InstanceId> instance_ids;
  Zone zone = Zone::kCharacterArea;
  UserId user_id;
};
struct Placed {
  InstanceId instance_id;
  Zone zone = Zone::kCharacterArea;
  UserId user_id;
};
struct SpliceSucceeded {
  std::array<InstanceId, 2> consumed;
  InstanceId produced;
  PartId part;
  UserId user_id;
};
struct SpliceRejected {
  InstanceId instance_a;
  InstanceId instance_b;
  std::string reason;
  UserId user_id;
};
struct VerificationSucceeded {
  CardId card_id;
  TaskId task_id;
  InstanceId instance_id;
  std::string character;
  UserId owner;
};
struct VerificationFailed {
  InstanceId instance_id;
  std::optional<TaskId> task_id;
  std::string expected;
  std::string got;
  UserId user_id;
};
struct CardSpent {
  CardId card_id;
};
struct ModelActivated {
  ModelId model_id;
  CardId card_id;
  UserId user_id;
};
struct PoseUpdated {
  UserId user_id;
  Pose pose;
  std::int64_t time_ms = 0;
};
struct Error {
  std::string code;
  std::string message;
};
struct Checkpoint {
  std::uint64_t digest = 0;
};
}  // namespace ev

using EventBody =
    std::variant<ev::SessionCreated, ev::UserJoined, ev::UserLeft, ev::TaskCreated,
                 ev::CoreCharacterExtracted, ev::ImageReady, ev::TaskFailed, ev::ModelJobStarted,
                 ev::ModelReady, ev::Grabbed, ev::Released, ev::Placed, ev::SpliceSucceeded,
                 ev::SpliceRejected, ev::VerificationSucceeded, ev::VerificationFailed,
                 ev::CardSpent, ev::ModelActivated, ev::PoseUpdated, ev::Error, ev::Checkpoint>;

struct Event {
  std::uint64_t seq = 0;
  // Set when the event answers a client command.
  std::optional<UserId> issuer;
  std::int64_t client_seq = 0;
  EventBody body;

  template <typename T>
  bool is() const noexcept {
    return std::holds_alternative<T>(body);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(body);
  }
};

std::string_view event_name(const EventBody& body);

// Machine-readable error codes carried by ev::Error.
namespace codes {
inline constexpr const char* kUnknownInstance = "UNKNOWN_INSTANCE";
inline constexpr const char* kGrabConflict = "GRAB_CONFLICT";
inline constexpr const char* kNotHolder = "NOT_HOLDER";
inline constexpr const char* kNoRecipe = "NO_RECIPE";
inline constexpr const char* kCardMismatch = "CARD_MISMATCH";
inline constexpr const char* kCardSpent = "CARD_SPENT";
inline constexpr const char* kBadState = "BAD_STATE";
inline constexpr const char* kBadSeq = "BAD_SEQ";
inline constexpr const char* kUnknownUser = "UNKNOWN_USER";
inline constexpr const char* kUnknownTask = "UNKNOWN_TASK";
inline constexpr const char* kUnknownModel = "UNKNOWN_MODEL";
inline constexpr const char* kUnknownCard = "UNKNOWN_CARD";
inline constexpr const char* kSessionFull = "SESSION_FULL";
}  // namespace codes

// ---------------------------------------------------------------------------
// Engine <-> generation pipeline

namespace req {
struct ExtractCoreCharacter {
  TaskId task_id;
  std::string text;
};
struct GenerateImage {
  TaskId task_id;
  std::string core;
};
struct GenerateModel3D {
  TaskId task_id;
  ModelId model_id;
  AssetRef image;
};
}  // namespace req

using PipelineRequest =
    std::variant<req::ExtractCoreCharacter, req::GenerateImage, req::GenerateModel3D>;

namespace res {
struct CoreCharacterExtracted {
  TaskId task_id;
  std::string character;
};
struct ImageReady {
  TaskId task_id;
  AssetRef asset;
};
struct ModelReady {
  TaskId task_id;
  ModelId model_id;
  AssetRef asset;
};
struct Failed {
  TaskId task_id;
  std::string stage;  // "extract", "image", "model3d"
  std::string reason;
};
}  // namespace res

using PipelineResult =
    std::variant<res::CoreCharacterExtracted, res::ImageReady, res::ModelReady, res::Failed>;

const TaskId& task_of(const PipelineRequest& r);
const TaskId& task_of(const PipelineResult& r);

}  // namespace tenon
