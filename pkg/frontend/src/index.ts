export {
  TerrainClient,
  Session,
  ServerError,
  type ClientOptions,
  type SessionInfo,
  type PenetrationResult,
  type DepthResult,
  type CommandsResult,
} from "./client.js";
export {
  Opcode,
  FrameDecoder,
  encodeFrame,
  asFloat32,
  asInt32,
  MAGIC,
  STATUS_OK,
  STATUS_ERROR,
  type Frame,
} from "./protocol.js";
export type {
  CameraSpec,
  CommandConfig,
  ConcatConfig,
  EdgeDetectConfig,
  PatchConfig,
  SimPipelineConfig,
} from "./config.js";
