!function(e){var T=function(t){return t+1};window.X=T}(this);var Broken=function(){return "<div"
