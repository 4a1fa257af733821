export { Rng, hashString } from "./rng";
export * from "./tensor";
export * from "./encoding";
export * from "./model";
export * from "./train";
export * from "./data";
