export { encodeTokens, encoderLayerForward, selfAttention } from "./encoder.js";
export {
  DEFAULT_BATCH_SIZE,
  DEFAULT_LAYERS,
  DEFAULT_MAX_TOKENS,
  extract,
  readCatalog,
} from "./extract.js";
export type { CatalogRow, ExtractionJob, ExtractionSummary } from "./extract.js";
export { packBank, readBank, writeBank } from "./mlse.js";
export type { Bank } from "./mlse.js";
export { loadModel, validateModel } from "./model.js";
export type {
  AttentionParams,
  EncoderLayer,
  EncoderModel,
  FeedForwardParams,
  LayerNormParams,
} from "./model.js";
export { CLS_TOKEN, EMPTY_TEXT, UNK_TOKEN, encodeText, wordTokens } from "./tokenizer.js";
export type { Vocab } from "./tokenizer.js";
export { buildToyModel, mulberry32 } from "./toymodel.js";
export type { ToyModelOptions } from "./toymodel.js";
